"""Command-line verification tool.

    qpreduce COMMAND --config FILE [--out FILE] [--seed N] [--quiet]
                     [--tolerance-scale F] [--refine K]

Exit status: 0 when every check passes, 1 when one fails, 2 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from . import config as cf
from . import expr as ex
from . import graded as gr
from . import paths as pa
from . import sigma as sg
from . import spray as sp
from . import structures as sts

__all__ = ["CheckRecord", "VerificationReport", "run", "emit_report", "report_json", "main", "COMMANDS"]


@dataclass
class CheckRecord:
    name: str
    max_residual: float
    tolerance: float
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.max_residual) and self.max_residual <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "max_residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "passed": self.passed,
            "stats": self.stats,
        }


@dataclass
class VerificationReport:
    command: str
    config: dict
    seed: int
    records: list[CheckRecord]
    notes: list[str] = field(default_factory=list)
    refinement: list[dict] | None = None
    elapsed: float = 0.0  # wall clock, shown to humans but kept out of the JSON
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        out = {
            "tool": "qpreduce",
            "version": self.version,
            "command": self.command,
            "seed": self.seed,
            "passed": self.passed,
            "records": [r.as_dict() for r in self.records],
            "notes": list(self.notes),
        }
        if self.refinement is not None:
            out["refinement"] = self.refinement
        out["config"] = self.config
        return out


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------------
# JSON with 17 significant digits


def _dump(obj, indent: int, level: int) -> str:
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".17g") if math.isfinite(v) else json.dumps(str(v))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _dump(obj.tolist(), indent, level)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _dump(v, indent, level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (inner + json.dumps(str(k)) + ": " + _dump(v, indent, level + 1) for k, v in obj.items())
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_json(report: VerificationReport) -> str:
    return _dump(report.as_dict(), 2, 0) + "\n"


def emit_report(report: VerificationReport, path=None, quiet: bool = False, stream=None) -> None:
    """Write the JSON report to ``path`` (or to the stream when quiet and no
    path is given) and, unless quiet, a human summary to the stream."""
    stream = sys.stdout if stream is None else stream
    text = report_json(report)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    if quiet:
        if path is None:
            stream.write(text)
        return
    stream.write(f"{report.command}  (seed {report.seed}, {report.elapsed:.2f} s)\n")
    for r in report.records:
        flag = "PASS" if r.passed else "FAIL"
        stream.write(f"  {flag}  {r.name:<40s} {r.max_residual:.3e}  <= {r.tolerance:.1e}\n")
    for note in report.notes:
        stream.write(f"  note: {note}\n")
    if report.refinement:
        for row in report.refinement:
            ratios = ", ".join(f"{q:.2f}" if q is not None else "-" for q in row["ratios"])
            stream.write(f"  refine {row['name']}: ratios {ratios}\n")
    stream.write("all checks passed\n" if report.passed else "some checks FAILED\n")


# ----------------------------------------------------------------------------
# helpers


def _points(rng, m: int, n: int, box: float) -> np.ndarray:
    return rng.uniform(-box, box, (m, n))


def _cotangent_points(rng, m: int, n: int, box: float, b_max: float) -> np.ndarray:
    return np.concatenate([_points(rng, m, n, box), rng.uniform(-b_max, b_max, (m, n))], axis=1)


def _bialgebroid(spec) -> sts.BialgebroidSpec:
    return sts.as_bialgebroid(spec)


def _poisson(spec, command: str) -> sts.PoissonSpec:
    if not isinstance(spec, sts.PoissonSpec):
        raise UsageError(f"{command} needs a Poisson structure (builtin poisson:* or an inline poisson entry)")
    return spec


def _random_sections(rng, n: int, r: int, count: int) -> list:
    P = gr.GradedPolynomial
    out = []
    for _ in range(count):
        s = P.zero(n, r)
        for kind in "ab":
            for k in range(r):
                c0, c1 = rng.integers(-2, 3, size=2)
                v = int(rng.integers(1, n + 1))
                s = s + P.monomial(n, r, ex.parse(f"{c0} + {c1}*x{v}", n), [(kind, k)])
        out.append(s)
    return out


def _time_curve(formulas):
    if formulas is None:
        return None
    nodes = [cf.time_formula(f) for f in formulas]
    return lambda t: np.array([ex.evaluate(nd, [t]) for nd in nodes])


def _is_constant(p: sts.PoissonSpec) -> bool:
    return all(not ex.variables(v) for v in p.pi.values())


# ----------------------------------------------------------------------------
# commands


def _formula_gradient_gap(nodes, pts, h: float = 1e-5) -> float:
    """Dual-number gradients against central differences (relative)."""
    worst = 0.0
    for node in nodes:
        for x in pts:
            _, g = ex.eval_gradient(node, x)
            E = h * np.eye(len(x))
            fd = np.array([(ex.evaluate(node, x + e) - ex.evaluate(node, x - e)) / (2 * h) for e in E])
            worst = max(worst, float(np.max(np.abs(g - fd))) / (1.0 + float(np.max(np.abs(g)))))
    return worst


def _check_algebroid(cfg, rng):
    P = cfg.params
    tol = P.tolerances
    spec = cfg.structure
    recs = []
    pts = _points(rng, P.samples, spec.n, P.box)
    if isinstance(spec, sts.PoissonSpec):
        recs.append(CheckRecord("pi jacobi", float(np.max(np.abs(spec.jacobi_residual(pts)), initial=0.0)), tol.identity))
    bi = _bialgebroid(spec)
    for side in ("primal", "dual"):
        alg = getattr(bi, side)
        if side == "dual" and alg.is_zero():
            continue
        res = sts.algebroid_axiom_residuals(alg, pts)
        recs.append(CheckRecord(f"{side} anchor compatibility", res.max_anchor, tol.identity))
        recs.append(CheckRecord(f"{side} jacobi", res.max_jacobi, tol.identity))
        recs.append(CheckRecord(f"{side} cross-oracle gap", sts.cross_oracle_gap(alg, pts), tol.algebraic))
    nodes = list(spec.pi.values()) if isinstance(spec, sts.PoissonSpec) else [
        nd for alg in (bi.primal, bi.dual) for nd in (*alg.anchor.values(), *alg.bracket.values())
    ]
    if nodes:
        # central differences carry O(h^2) truncation and O(eps/h) rounding
        recs.append(CheckRecord("formula gradients vs central differences", _formula_gradient_gap(nodes, pts[:5]), tol.flow))
    return recs, []


def _check_bialgebroid(cfg, rng):
    P = cfg.params
    bi = _bialgebroid(cfg.structure)
    pts = _points(rng, P.samples, bi.n, P.box)
    theta = gr.theta_from_spec(bi)
    recs = [CheckRecord("master equation", gr.cme_residual(theta, pts).max_residual, P.tolerances.identity)]
    rep = sts.bialgebroid_residuals(bi, pts)
    for name, group in rep.groups.items():
        worst = sorted(group.entries, key=lambda e: -e[1])[:3]
        recs.append(CheckRecord(name, group.max_residual, P.tolerances.identity, {"largest": [[k, v] for k, v in worst]}))
    return recs, [rep.note] if rep.note else []


def _check_courant(cfg, rng):
    P = cfg.params
    bi = _bialgebroid(cfg.structure)
    n, r = bi.n, bi.r
    theta = gr.theta_from_spec(bi)
    secs = _random_sections(rng, n, r, 3 * P.triples)
    triples = [tuple(secs[3 * k: 3 * k + 3]) for k in range(P.triples)]
    funcs = [gr.GradedPolynomial.function(n, r, ex.parse(f"x1*x{n} + sin(x{n})", n))]
    pts = _points(rng, min(P.samples, 20), n, P.box)
    rep = gr.courant_axiom_residuals(theta, triples, funcs, pts)
    recs = [CheckRecord(f"courant {k}", v, P.tolerances.identity) for k, v in rep.per_axiom.items()]
    recs.append(CheckRecord("master equation", rep.cme_max, P.tolerances.identity))
    return recs, [rep.note] if rep.note else []


def _detect_ga(cfg, rng):
    P = cfg.params
    bi = _bialgebroid(cfg.structure)
    pts = _points(rng, P.samples, bi.n, P.box)
    parts = gr.lifted_ga_components(gr.theta_from_spec(bi))
    present = {w: poly.max_abs(pts) for w, poly in parts.items()}
    high = max((v for w, v in present.items() if w >= 2), default=0.0)
    stats = {"ga_degrees": sorted(w for w, v in present.items() if v > 0), "max_by_degree": {str(w): v for w, v in present.items()}}
    notes = []
    if high > 0:
        notes.append("a ga=2 component is present: the coisotropic reduction does not apply")
    return [CheckRecord("ga=2 component present", high, 0.0, stats)], notes


def _integrate_path(cfg, rng):
    P = cfg.params
    bi = _bialgebroid(cfg.structure)
    n, r = bi.n, bi.r
    drv = P.path
    x0 = np.zeros(n) if drv.x0 is None else np.asarray(drv.x0, float)
    a = _time_curve(drv.a) or (lambda t: np.ones(r))
    try:
        if drv.b0 is None:
            s = pa.integrate_apath(bi, x0, a, P.N, box=P.flow_box)
        else:
            p = _time_curve(drv.p) or (lambda t: np.zeros(n))
            s = pa.integrate_cotangent_path(bi, x0, np.asarray(drv.b0, float), a, p, P.N, box=P.flow_box)
    except pa.BlowUpError as err:
        return [CheckRecord("integration", math.inf, P.tolerances.flow, {"error": str(err), "step": err.step})], []
    except ValueError as err:
        raise UsageError(str(err)) from None
    recs = [CheckRecord("midpoint defect", float(np.max(s.defect)), P.tolerances.flow, {"final_x": s.x[-1]})]
    if s.b is not None:
        res = pa.coisotropic_residual(bi, s.t, *pa.to_constraint_fields(s))
        recs.append(CheckRecord("constraint residual", res.max_residual, P.tolerances.constraint, {"final_b": s.b[-1]}))
    if P.export.path_csv:
        pa.write_csv(s, P.export.path_csv)
    return recs, []


def _realize(cfg, rng):
    P = cfg.params
    tol = P.tolerances
    p = _poisson(cfg.structure, "realize")
    n = p.n
    Z = sp.default_spray(p)
    pts = _cotangent_points(rng, P.samples, n, P.box, P.b_max)
    recs = []
    try:
        om = sp.omega_Z(Z, pts, P.Q, P.N, P.flow_box)
    except pa.BlowUpError as err:
        return [CheckRecord("spray flow", math.inf, tol.flow, {"error": str(err)})], []
    recs.append(CheckRecord("antisymmetry", float(np.max(np.abs(om + om.transpose(0, 2, 1)))), tol.identity))
    det0 = abs(np.linalg.det(sp.canonical_matrix(n)))
    dets = np.abs(np.linalg.det(om))
    recs.append(CheckRecord("nondegeneracy |det Omega_can| / min |det omega_Z|", det0 / max(float(np.min(dets)), 1e-300), 2.0))
    few = pts[: min(len(pts), 20)]
    recs.append(CheckRecord("closedness", sp.closedness_defect(Z, few, 1e-3, P.Q, min(P.N, 200), P.flow_box), tol.closedness))
    zero = np.concatenate([few[:, :n], np.zeros_like(few[:, n:])], axis=1)
    om0 = sp.omega_Z(Z, zero, P.Q, P.N, P.flow_box)
    Pi = p.matrix(few[:, :n])
    gap = max(float(np.max(np.abs(om0[k] - sp.omega_Z_constant(Pi[k])))) for k in range(len(few)))
    recs.append(CheckRecord("zero section equals constant-pi form of pi(x)", gap, tol.identity))
    if _is_constant(p):
        want = sp.omega_Z_constant(p.matrix(np.zeros((1, n)))[0])
        recs.append(CheckRecord("constant pi closed form", float(np.max(np.abs(om - want))), tol.identity))
    recs.append(CheckRecord("spray curves are a-paths", max(sp.apath_property_check(Z, y, P.N, P.flow_box) for y in pts[:5]), tol.flow))
    bi = sts.poisson_to_bialgebroid(p)
    worst = 0.0
    for y in pts[:5]:
        lift = sp.spray_section_lift(Z, y, np.eye(2 * n)[:2], P.N_t, P.substeps, P.flow_box)
        for w in range(2):
            worst = max(worst, pa.coisotropic_residual(bi, lift.t, *sp.lift_constraint_fields(lift, w)).max_residual)
    recs.append(CheckRecord("section lift on constraint surface", worst, tol.constraint))
    if P.export.omega_json:
        doc = [{"point": pts[k].tolist(), "omega": om[k].tolist()} for k in range(len(pts))]
        with open(P.export.omega_json, "w", encoding="utf-8") as fh:
            fh.write(_dump(doc, 1, 0) + "\n")
    return recs, []


def _check_poisson_map(cfg, rng):
    P = cfg.params
    p = _poisson(cfg.structure, "check-poisson-map")
    Z = sp.default_spray(p)
    pts = _cotangent_points(rng, P.samples, p.n, P.box, P.b_max)
    try:
        rep = sp.poisson_map_residual(Z, pts, Q=P.Q, N=P.N, box=P.flow_box)
    except pa.BlowUpError as err:
        return [CheckRecord("spray flow", math.inf, P.tolerances.flow, {"error": str(err)})], []
    stats = {"excluded": len(rep.excluded), "samples": len(pts)}
    notes = [f"{len(rep.excluded)} samples had a singular omega_Z and were excluded"] if rep.excluded else []
    return [CheckRecord("projection is a Poisson map", rep.max_residual, P.tolerances.flow, stats)], notes


def _verify_proposition(cfg, rng):
    P = cfg.params
    p = _poisson(cfg.structure, "verify-proposition")
    n = p.n
    Z = sp.default_spray(p)
    d = sg.PSMPointData(
        _cotangent_points(rng, P.samples, n, P.box, P.b_max),
        rng.normal(size=(P.samples, 2, 2 * n)),
        rng.normal(size=(P.samples, 2, 2 * n)),
    )
    worst = [0.0, 0.0]
    for t in P.times:
        try:
            chk = sg.pointwise_identity_check(Z, d, t, P.N, P.flow_box)
        except pa.BlowUpError as err:
            return [CheckRecord("spray flow", math.inf, P.tolerances.identity, {"error": str(err)})], []
        worst = [max(a, b) for a, b in zip(worst, chk.residuals)]
    return [
        CheckRecord("pairing identity", worst[0], P.tolerances.identity, {"times": P.times}),
        CheckRecord("quadratic identity", worst[1], P.tolerances.identity, {"times": P.times}),
    ], []


def _verify_bf(cfg, rng):
    P = cfg.params
    spec = cfg.structure
    if isinstance(spec, sts.PoissonSpec):
        raise UsageError("verify-bf-reduction needs a Lie algebra or a bialgebroid with zero A-side")
    try:
        case, bi = sg._classify(spec)
    except ValueError as err:
        raise UsageError(str(err)) from None
    fields = sg.random_bf_fields(case, bi.n, bi.r, P.torus.nx, P.torus.ny, P.N_t, rng)
    if P.export.fields_json:
        sg.export_fields(P.export.fields_json, **{k: v for k, v in asdict(fields).items()})
    chk = sg.bf_reduction_check(spec, fields)
    stats = {"case": chk.case, "restricted": chk.restricted, "effective": chk.effective}
    return [
        CheckRecord("restricted minus effective action", chk.difference, P.tolerances.algebraic, stats),
        CheckRecord("delta-constraint violation", chk.constraint_violation, P.tolerances.algebraic),
    ], []


def _verify_reduction(cfg, rng):
    P = cfg.params
    p = _poisson(cfg.structure, "verify-reduction")
    Z = sp.default_spray(p)
    Y, V = sg.random_psm_fields(p.n, P.torus.nx, P.torus.ny, rng, x_scale=0.5 * P.box, b_max=P.b_max)
    if P.export.fields_json:
        sg.export_fields(P.export.fields_json, Y=Y, V=V)
    try:
        chk = sg.reduction_equality_check(Z, Y, V, P.N_t, P.Q, P.N, P.substeps, P.flow_box)
    except pa.BlowUpError as err:
        return [CheckRecord("spray flow", math.inf, P.tolerances.flow, {"error": str(err)})], []
    grid = chk.grid
    oriented = replace(grid, Bdot=-grid.Bdot, Pdot=-grid.Pdot, dBdot=-grid.dBdot)
    stats = {"csm": chk.csm, "psm": chk.psm}
    return [
        CheckRecord("CSM(lift) minus PSM(omega_Z)", chk.difference, P.tolerances.flow, stats),
        CheckRecord("lift on multiplier constraints", max(sg.csm_constraint_residuals(p, oriented)), P.tolerances.constraint),
    ], []


COMMANDS = {
    "check-algebroid": _check_algebroid,
    "check-bialgebroid": _check_bialgebroid,
    "check-courant": _check_courant,
    "detect-ga-obstruction": _detect_ga,
    "integrate-path": _integrate_path,
    "realize": _realize,
    "check-poisson-map": _check_poisson_map,
    "verify-proposition": _verify_proposition,
    "verify-bf-reduction": _verify_bf,
    "verify-reduction": _verify_reduction,
}


def _scaled(cfg: cf.ToolConfig, tolerance_scale: float, level: int) -> cf.ToolConfig:
    P = cfg.params
    k = 2**level
    tols = cf.Tolerances(**{name: v * tolerance_scale for name, v in asdict(P.tolerances).items()})
    params = replace(P, N=P.N * k, N_t=P.N_t * k, Q=P.Q * k, tolerances=tols)
    return replace(cfg, params=params)


def run(command: str, cfg: cf.ToolConfig, seed: int | None = None, tolerance_scale: float = 1.0, refine: int = 0) -> VerificationReport:
    """Run one verification pipeline; ``refine`` re-runs with N, N_t and Q
    doubled that many times and records the residual ratios."""
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}")
    seed = cfg.params.seed if seed is None else seed
    start = time.perf_counter()
    base = _scaled(cfg, tolerance_scale, 0)
    records, notes = COMMANDS[command](base, np.random.default_rng(seed))
    refinement = None
    if refine:
        levels = [records]
        for level in range(1, refine + 1):
            levels.append(COMMANDS[command](_scaled(cfg, tolerance_scale, level), np.random.default_rng(seed))[0])
        refinement = []
        for i, rec in enumerate(records):
            vals = [lv[i].max_residual for lv in levels]
            ratios = [a / b if b > 0 and math.isfinite(a) else None for a, b in zip(vals, vals[1:])]
            refinement.append({"name": rec.name, "residuals": vals, "ratios": ratios})
    echo = cfg.echo()
    echo["params"]["seed"] = seed
    report = VerificationReport(command, echo, seed, records, notes, refinement)
    report.elapsed = time.perf_counter() - start
    return report


def _parser() -> argparse.ArgumentParser:
    defaults = json.dumps(cf.DEFAULTS, indent=1)
    ap = argparse.ArgumentParser(
        prog="qpreduce",
        description="Verify bialgebroid, spray-realization and sigma-model identities.",
        epilog="default params:\n" + defaults,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON configuration file (schema: qpreduce/config.schema.json)")
    ap.add_argument("--out", help="write the JSON report here")
    ap.add_argument("--seed", type=int, help="override params.seed (unsigned 64-bit)")
    ap.add_argument("--quiet", action="store_true", help="JSON only, no human summary")
    ap.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every tolerance")
    ap.add_argument("--refine", type=int, default=0, metavar="K", help="re-run with N, N_t, Q doubled K times")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("qpreduce: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.refine < 0 or not args.tolerance_scale > 0:
        print("qpreduce: --refine must be >= 0 and --tolerance-scale > 0", file=sys.stderr)
        return 2
    try:
        cfg = cf.load_config(args.config)
        report = run(args.command, cfg, args.seed, args.tolerance_scale, args.refine)
    except (cf.ConfigError, UsageError) as err:
        print(f"qpreduce: {err}", file=sys.stderr)
        return 2
    try:
        emit_report(report, args.out, args.quiet)
    except OSError as err:
        print(f"qpreduce: cannot write report: {err}", file=sys.stderr)
        return 2
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
