"""Refinement tables for the flow-based checks on so3star.

    python scripts/convergence_study.py [--quick] [--seed N]

Prints residuals and successive ratios for
  * the Poisson-map residual of the spray realization under (N, Q) doubling,
  * CSM(lift) - PSM(omega_Z) on a torus under N_t doubling,
  * the constraint residual of a spray section lift under N_t doubling.
"""
import argparse

import numpy as np

from qpreduce import paths as pa
from qpreduce import sigma as sg
from qpreduce import spray as sp
from qpreduce import structures as sts


def table(title, labels, values):
    print(f"\n{title}")
    prev = None
    for label, v in zip(labels, values):
        ratio = f"{prev / v:8.2f}" if prev is not None and v > 0 else "       -"
        print(f"  {label:>14s}  {v:10.3e}  {ratio}")
        prev = v


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--quick", action="store_true", help="fewer samples and a smaller torus")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    p = sts.builtin("poisson:so3star")
    Z = sp.default_spray(p)

    m = 5 if args.quick else 20
    pts = np.concatenate([rng.uniform(-1, 1, (m, 3)), rng.uniform(-0.1, 0.1, (m, 3))], axis=1)
    ladder = [(4, 1), (8, 2), (16, 4), (32, 8)]
    vals = [sp.poisson_map_residual(Z, pts, Q=Q, N=N).max_residual for N, Q in ladder]
    table("Poisson-map residual, (N, Q)", [f"({N}, {Q})" for N, Q in ladder], vals)

    nx = 4 if args.quick else 8
    Y, V = sg.random_psm_fields(3, nx, nx, rng, b_max=0.05)
    steps = [25, 50, 100, 200]
    vals = [sg.reduction_equality_check(Z, Y, V, N_t=k).difference for k in steps]
    table(f"|CSM(lift) - PSM(omega_Z)| on a {nx}x{nx} torus, N_t", [str(k) for k in steps], vals)

    spec = sts.poisson_to_bialgebroid(p)
    y = np.array([0.2, -0.1, 0.4, 0.3, 0.2, -0.4])
    vals = []
    for k in steps:
        lift = sp.spray_section_lift(Z, y, np.eye(6)[:2], k)
        vals.append(pa.coisotropic_residual(spec, lift.t, *sp.lift_constraint_fields(lift, 1)).max_residual)
    table("section lift constraint residual, N_t", [str(k) for k in steps], vals)


if __name__ == "__main__":
    main()
