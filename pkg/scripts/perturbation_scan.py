"""Master-equation residual after perturbing one bracket constant.

    python scripts/perturbation_scan.py [--eps 1e-3]

For every catalogue structure and every bracket constant c^g_{ab} (a < b)
of the primal side, adds eps and prints residual / eps.  Entries where a
perturbation leaves the structure a Lie algebroid show 0.
"""
import argparse
import itertools

import numpy as np

from qpreduce import graded as gr
from qpreduce import structures as sts

CATALOGUE = ["so3", "aff1", "tangent:R^2", "tangent:R^3", "poisson:constant2d", "poisson:x1-rotation", "poisson:so3star"]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--eps", type=float, default=1e-3)
    ap.add_argument("--samples", type=int, default=100)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    for name in CATALOGUE:
        spec = sts.as_bialgebroid(sts.builtin(name))
        pts = rng.uniform(-1, 1, (args.samples, spec.n))
        print(f"{name}")
        for a, b in itertools.combinations(range(spec.r), 2):
            for g in range(spec.r):
                bad = sts.BialgebroidSpec(spec.primal.perturbed("bracket", (a, b, g), args.eps), spec.dual)
                res = gr.cme_residual(gr.theta_from_spec(bad), pts).max_residual
                print(f"  c[{a + 1},{b + 1} -> {g + 1}]  residual/eps = {res / args.eps:8.4f}")


if __name__ == "__main__":
    main()
