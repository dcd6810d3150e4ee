"""Acceptance criteria 1-12.

Every criterion that maps onto a command runs through ``qpreduce.cli.main``
and gates on its exit status; the graded-engine soundness check has no
command and calls the library directly.  Each test prints one
``criterion N: PASS|FAIL`` line; the terminal summary repeats them in order.

Run alone with ``pytest tests/test_acceptance.py -s`` or
``python tests/test_acceptance.py``.
"""
import contextlib
import io
import itertools
import json
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.linalg import expm

from qpreduce import cli
from qpreduce import config as cf
from qpreduce import paths as pa
from qpreduce import sigma as sg
from qpreduce import structures as sts
from strategies import bracket_identity_residuals, random_monomial

RESULTS: dict[int, tuple[bool, str]] = {}
SUITE_START = time.perf_counter()

CATALOGUE = ["so3", "tangent:R^1", "tangent:R^2", "tangent:R^3", "poisson:constant2d", "poisson:x1-rotation", "poisson:so3star"]
ALL_BUILTINS = CATALOGUE + ["aff1", "abelian:3", "coalgebra:so3", "coalgebra:aff1"]
EPS = 1e-3


def verdict(number: int, ok: bool, detail: str):
    RESULTS[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture
def qp(tmp_path):
    counter = itertools.count()

    def run(command, raw, *flags):
        k = next(counter)
        cfg, out = tmp_path / f"cfg{k}.json", tmp_path / f"report{k}.json"
        cfg.write_text(json.dumps(raw), encoding="utf-8")
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
            code = cli.main([command, "--config", str(cfg), "--out", str(out), "--quiet", *flags])
        report = json.loads(out.read_text(encoding="utf-8")) if out.exists() else None
        return code, report

    run.dir = tmp_path
    return run


def record(report, name):
    return next(r for r in report["records"] if r["name"] == name)


def with_tol(raw, **tols):
    raw = json.loads(json.dumps(raw))
    raw.setdefault("params", {}).setdefault("tolerances", {}).update(tols)
    return raw


# ---------------------------------------------------------------------------


def test_criterion_01_graded_engine_soundness():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    nonzero = 0
    for _ in range(1000):
        n, r = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        f, g, h = (random_monomial(rng, n, r) for _ in range(3))
        nonzero += sum(not res.is_zero() for res in bracket_identity_residuals(f, g, h))
    elapsed = time.perf_counter() - start
    verdict(1, nonzero == 0 and elapsed < 5, f"1000 monomial triples, {nonzero} nonzero symbolic residuals, {elapsed:.2f} s")


def test_criterion_02_master_equation_suite(qp):
    start = time.perf_counter()
    problems = []
    for name in CATALOGUE:
        code, rep = qp("check-bialgebroid", with_tol({"structure": {"builtin": name}}, identity=1e-10))
        if code != 0:
            problems.append(f"{name} unperturbed exit {code}")
    inside = total = 0
    for name in CATALOGUE:
        r = sts.as_bialgebroid(sts.builtin(name)).r
        for a, b in itertools.combinations(range(1, r + 1), 2):
            for g in range(1, r + 1):
                total += 1
                raw = {"structure": {"builtin": name, "perturb": [{"kind": "bracket", "key": [a, b, g], "eps": EPS}]}}
                code, rep = qp("check-bialgebroid", with_tol(raw, identity=1e-10))
                res = record(rep, "master equation")["max_residual"]
                if code == 1 and EPS / 10 <= res <= 10 * EPS:
                    inside += 1
                else:
                    problems.append(f"{name} c[{a},{b}->{g}] residual {res:.1e} exit {code}")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 10
    detail = f"{inside}/{total} perturbations in [eps/10, 10 eps], {elapsed:.2f} s"
    verdict(2, ok, detail + ("; outside: " + "; ".join(problems) if problems else ""))


def test_criterion_03_cross_oracle_agreement(qp):
    bad = []
    for name in ALL_BUILTINS:
        code, rep = qp("check-algebroid", {"structure": {"builtin": name}})
        gaps = [r["max_residual"] for r in rep["records"] if r["name"].endswith("cross-oracle gap")]
        if code != 0 or not gaps or max(gaps) > 1e-12:
            bad.append(name)
    verdict(3, not bad, f"{len(ALL_BUILTINS)} builtins, disagreeing: {bad or 'none'}")


def test_criterion_04_courant_axioms(qp):
    bad = []
    for name in CATALOGUE:
        code, rep = qp("check-courant", with_tol({"structure": {"builtin": name}, "params": {"triples": 20}}, identity=1e-10))
        if code != 0:
            bad.append(name)
    orders = []
    for name, key in (("so3", [1, 2, 1]), ("tangent:R^2", [1, 2, 1]), ("poisson:so3star", [1, 2, 1])):
        res = []
        for eps in (EPS, 2 * EPS):
            raw = {"structure": {"builtin": name, "perturb": [{"kind": "bracket", "key": key, "eps": eps}]}}
            code, rep = qp("check-courant", with_tol(raw, identity=1e-10))
            if code != 1:
                bad.append(f"{name} perturbed exit {code}")
            res.append(max(r["max_residual"] for r in rep["records"] if r["name"].startswith("courant")))
        ratio = res[1] / res[0] if res[0] > 0 else float("inf")
        orders.append(ratio)
        if not (res[0] >= EPS / 10 and 1.8 <= ratio <= 2.2):
            bad.append(f"{name} perturbed residual {res[0]:.1e} ratio {ratio:.2f}")
    verdict(4, not bad, f"unperturbed pass on {len(CATALOGUE)} doubles; eps-doubling ratios {[round(q, 3) for q in orders]}; issues: {bad or 'none'}")


def test_criterion_05_path_integrator_order(qp):
    issues = []
    # a-paths of so3star with constant a rotate x: x(t) = expm(t M) x0
    so3star = sts.poisson_to_bialgebroid(sts.builtin("poisson:so3star"))
    a = np.array([0.3, -0.7, 0.5])
    x0 = np.array([0.4, 0.1, -0.2])
    M = np.stack([so3star.primal.anchor_values(e[None])[0] @ a for e in np.eye(3)], axis=1)
    # coadjoint flow of so(3): db_alpha/dt = -c^g_{alpha beta} a^beta b_g
    so3 = sts.builtin("so3")
    c = so3.primal.bracket_values(np.zeros((1, 1)))[0]
    Mc = -np.einsum("abg,b->ag", c, a)
    b0 = np.array([0.2, 0.1, -0.4])
    cases = {
        "apath": ({"builtin": "poisson:so3star"}, {"x0": x0.tolist(), "a": [str(v) for v in a]}, lambda s: s.x[-1], expm(M) @ x0),
        "cotangent": ({"builtin": "so3"}, {"x0": [0.0], "b0": b0.tolist(), "a": [str(v) for v in a], "p": ["0"]}, lambda s: s.b[-1], expm(Mc) @ b0),
    }
    summary = []
    for label, (structure, path, pick, exact) in cases.items():
        errs = []
        for N in (10, 20, 40, 200):
            csv = qp.dir / f"{label}{N}.csv"
            raw = {"structure": structure, "params": {"N": N, "path": path, "export": {"path_csv": str(csv)}}}
            code, _ = qp("integrate-path", raw)
            # coarse grids may miss the O(h^2) constraint tolerance (exit 1)
            if code not in ((0,) if N == 200 else (0, 1)):
                issues.append(f"{label} N={N} exit {code}")
            errs.append(float(np.max(np.abs(pick(pa.read_csv(csv)) - exact))))
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        summary.append(f"{label} ratios {ratios[0]:.1f}, {ratios[1]:.1f}, N=200 error {errs[3]:.1e}")
        if min(ratios) < 8:
            issues.append(f"{label} ratio below 8")
        if label == "cotangent" and errs[3] > 1e-8:
            issues.append("coadjoint error above 1e-8")
    verdict(5, not issues, "; ".join(summary) + (f"; issues: {issues}" if issues else ""))


def test_criterion_06_spray_realization(qp):
    start = time.perf_counter()
    issues = []
    so3star = {"structure": {"builtin": "poisson:so3star"}, "params": {"samples": 20, "b_max": 0.1, "N": 500, "Q": 16}}
    code, rep = qp("check-poisson-map", with_tol(so3star, flow=1e-6))
    top = rep["records"][0]["max_residual"]
    if code != 0:
        issues.append("so3star Poisson map above 1e-6")
    ladder = json.loads(json.dumps(so3star))
    ladder["params"].update(N=4, Q=1)
    code, rep = qp("check-poisson-map", ladder, "--refine", "2")
    row = rep["refinement"][0]
    # only compare rungs that sit above the round-off floor
    ratios = [q for q, v in zip(row["ratios"], row["residuals"][1:]) if v > 1e-12]
    if not ratios or min(ratios) < 4:
        issues.append(f"ladder ratios {row['ratios']}")
    code, rep = qp("realize", with_tol({"structure": {"builtin": "poisson:constant2d"}, "params": {"samples": 20}}, identity=1e-10))
    const_gap = record(rep, "constant pi closed form")["max_residual"]
    if const_gap > 1e-10:
        issues.append("constant pi closed form")
    code, rep = qp("realize", with_tol({"structure": {"poisson": {"dim": 2, "pi": []}}, "params": {"samples": 20}}, identity=1e-12))
    zero_gap = record(rep, "constant pi closed form")["max_residual"]
    if code != 0 or zero_gap > 1e-12:
        issues.append("pi = 0 form differs from the canonical one")
    elapsed = time.perf_counter() - start
    if elapsed >= 30:
        issues.append("runtime")
    ladder_txt = ", ".join(f"{v:.1e}" for v in row["residuals"])
    detail = f"so3star {top:.1e} at N=500 Q=16; ladder {ladder_txt}; constant {const_gap:.1e}; zero {zero_gap:.1e}; {elapsed:.1f} s"
    verdict(6, not issues, detail + (f"; issues: {issues}" if issues else ""))


def test_criterion_07_pointwise_proposition(qp):
    found = {}
    for name, tol in (("poisson:so3star", 1e-8), ("poisson:constant2d", 1e-12)):
        code, rep = qp("verify-proposition", with_tol({"structure": {"builtin": name}, "params": {"samples": 100}}, identity=tol))
        found[name] = (code, max(r["max_residual"] for r in rep["records"]))
    ok = all(code == 0 for code, _ in found.values())
    verdict(7, ok, ", ".join(f"{k} {v:.1e} (exit {c})" for k, (c, v) in found.items()))


def test_criterion_08_action_level_proposition(qp):
    start = time.perf_counter()
    base = {"params": {"torus": {"nx": 8, "ny": 8}, "Q": 16}}
    diffs = {}
    for name, tol in (("poisson:so3star", 1e-6), ("poisson:constant2d", 1e-8)):
        for N_t in (200, 400):
            raw = with_tol(dict(base, structure={"builtin": name}), flow=tol)
            raw["params"]["N_t"] = N_t
            code, rep = qp("verify-reduction", raw)
            diffs[name, N_t] = (code, record(rep, "CSM(lift) minus PSM(omega_Z)")["max_residual"])
    elapsed = time.perf_counter() - start
    ratio = diffs["poisson:so3star", 200][1] / diffs["poisson:so3star", 400][1]
    ok = all(c == 0 for c, _ in diffs.values()) and ratio >= 4 * 0.99 and elapsed < 60
    detail = ", ".join(f"{k[0]} N_t={k[1]}: {v:.1e}" for k, (_, v) in diffs.items())
    verdict(8, ok, f"{detail}; so3star ratio {ratio:.3f}; {elapsed:.1f} s")


def test_criterion_09_bf_reductions(qp):
    trivial_a = {"structure": cf.structure_config(sg.trivial_a_example())}
    cases = {"abelian": {"structure": {"builtin": "abelian:3"}}, "so3 coalgebra": {"structure": {"builtin": "coalgebra:so3"}}, "trivial A": trivial_a}
    found = {}
    for label, raw in cases.items():
        raw = json.loads(json.dumps(raw))
        raw["params"] = {"torus": {"nx": 4, "ny": 4}, "N_t": 16, "tolerances": {"algebraic": 1e-12}}
        code, rep = qp("verify-bf-reduction", raw)
        found[label] = (code, record(rep, "restricted minus effective action")["max_residual"], record(rep, "restricted minus effective action")["stats"]["case"])
    ok = all(c == 0 for c, _, _ in found.values())
    verdict(9, ok, ", ".join(f"{k} [{case}] {v:.1e}" for k, (_, v, case) in found.items()))


def test_criterion_10_ga_obstruction(qp):
    issues = []
    code, rep = qp("detect-ga-obstruction", {"structure": {"builtin": "so3", "h": [[1, 2, 3, "0.5"]]}})
    rec = rep["records"][0]
    if code != 1 or rec["name"] != "ga=2 component present" or rec["passed"]:
        issues.append("proto term not detected")
    seen = set()
    for name in ALL_BUILTINS:
        code, rep = qp("detect-ga-obstruction", {"structure": {"builtin": name}})
        degrees = set(rep["records"][0]["stats"]["ga_degrees"])
        seen |= degrees
        if code != 0 or not degrees <= {0, 1}:
            issues.append(f"{name} degrees {sorted(degrees)}")
    verdict(10, not issues, f"h != 0 flagged with exit 1; h = 0 builtins use ga {sorted(seen)}" + (f"; issues: {issues}" if issues else ""))


def test_criterion_11_coisotropic_constraints(qp):
    raw = {"structure": {"builtin": "poisson:so3star"}, "params": {"samples": 6, "N_t": 100}}
    code, rep = qp("realize", raw, "--refine", "2")
    row = next(r for r in rep["refinement"] if r["name"] == "section lift on constraint surface")
    ok = code == 0 and all(q is not None and 3.6 <= q <= 4.4 for q in row["ratios"])
    res = ", ".join(f"{v:.2e}" for v in row["residuals"])
    verdict(11, ok, f"N_t=100,200,400 residuals {res}, ratios {[round(q, 3) for q in row['ratios']]}")


def test_criterion_12_cli_determinism(tmp_path):
    exe = shutil.which("qpreduce")
    base = [exe] if exe else [sys.executable, "-m", "qpreduce"]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"structure": {"builtin": "poisson:so3star"}, "params": {"samples": 10, "torus": {"nx": 4, "ny": 4}}}))
    same = True
    for command in ("check-poisson-map", "verify-reduction", "check-courant"):
        outs = []
        for k in range(2):
            out = tmp_path / f"{command}{k}.json"
            proc = subprocess.run([*base, command, "--config", str(cfg), "--seed", "12345", "--out", str(out), "--quiet"], check=False)
            same &= proc.returncode == 0
            outs.append(out.read_bytes())
        same &= outs[0] == outs[1]
    elapsed = time.perf_counter() - SUITE_START
    verdict(12, same and elapsed < 180, f"byte-identical reports: {same}; acceptance suite so far {elapsed:.1f} s")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
