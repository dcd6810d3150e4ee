"""Algebroid paths, their cotangent lifts and the coisotropic constraints.

An A-path is a curve a(t) in A over a base curve x(t) with dx/dt = rho(x) a.
The cotangent lift adds (b, p) with

    db_alpha/dt = -rho^i_alpha p_i - c^g_{alpha beta} b_g a^beta.

The constraint surface uses dt-density fields with the opposite orientation,
so a path (x, a, b, p) corresponds to constraint fields
(X, Adot, B, Pdot) = (x, -a, b, -p); see ``to_constraint_fields``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .structures import BialgebroidSpec, LieAlgebroidSpec

__all__ = [
    "BlowUpError",
    "PathSample",
    "ConstraintResidualReport",
    "integrate_apath",
    "integrate_cotangent_path",
    "coisotropic_residual",
    "to_constraint_fields",
    "from_constraint_fields",
    "write_csv",
    "read_csv",
    "rk4",
]


class BlowUpError(RuntimeError):
    """Integration produced non-finite values or left the allowed box.

    ``partial`` holds the nodes computed before the failure.
    """

    def __init__(self, message: str, step: int, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


@dataclass
class PathSample:
    t: np.ndarray
    x: np.ndarray
    a: np.ndarray
    b: np.ndarray | None = None
    p: np.ndarray | None = None
    defect: np.ndarray | None = None  # ODE residual at cell midpoints

    def __post_init__(self):
        if self.t.ndim != 1 or len(self.t) < 3:
            raise ValueError("a path needs a uniform grid with N >= 2")
        for name in ("x", "a", "b", "p"):
            arr = getattr(self, name)
            if arr is not None and arr.shape[0] != len(self.t):
                raise ValueError(f"layer {name} does not match the grid")

    @property
    def N(self) -> int:
        return len(self.t) - 1


def _spec_side(spec) -> LieAlgebroidSpec:
    return spec.primal if isinstance(spec, BialgebroidSpec) else spec


def _driver(curve, N: int, width: int, name: str) -> Callable[[float], np.ndarray]:
    """Callable t -> vector for a callable or a per-node table on the grid."""
    if callable(curve):
        def f(t):
            v = np.asarray(curve(t), dtype=float).reshape(-1)
            if v.shape != (width,):
                raise ValueError(f"{name}(t) must have {width} components")
            return v
        return f
    table = np.asarray(curve, dtype=float)
    if table.ndim == 1 and width == 1:
        table = table[:, None]
    if table.shape != (N + 1, width):
        raise ValueError(f"{name} table must have shape {(N + 1, width)}, got {table.shape}")

    def g(t):
        s = min(max(t * N, 0.0), float(N))
        k = min(int(s), N - 1)
        w = s - k
        return (1 - w) * table[k] + w * table[k + 1]

    return g


def rk4(rhs, y0: np.ndarray, N: int, t1: float = 1.0, box: float | None = None):
    """Classical fourth-order integration of y' = rhs(t, y) on a uniform grid.

    Returns (t, ys, fs) with fs the right-hand side at the nodes.  Raises
    BlowUpError if a value becomes non-finite or leaves ``|y| <= box``.
    """
    h = t1 / N
    t = np.linspace(0.0, t1, N + 1)
    ys = np.empty((N + 1,) + np.shape(y0))
    fs = np.empty_like(ys)
    ys[0] = y0
    y = np.asarray(y0, dtype=float)
    for k in range(N):
        tk = t[k]
        k1 = rhs(tk, y)
        fs[k] = k1
        k2 = rhs(tk + h / 2, y + h / 2 * k1)
        k3 = rhs(tk + h / 2, y + h / 2 * k2)
        k4 = rhs(tk + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or (box is not None and np.max(np.abs(y)) > box):
            raise BlowUpError(f"integration left the finite box at step {k + 1}", k + 1, (t[: k + 1], ys[: k + 1]))
        ys[k + 1] = y
    fs[N] = rhs(t[N], y)
    return t, ys, fs


def _midpoint_defect(rhs, t, ys, fs) -> np.ndarray:
    """|x'(m) - f(m, x(m))| at cell midpoints of the cubic Hermite interpolant.

    The derivative error of the interpolant vanishes to leading order at the
    midpoint, so the defect has the order of the integrator.
    """
    h = t[1] - t[0]
    out = np.empty(len(t) - 1)
    for k in range(len(t) - 1):
        ym = 0.5 * (ys[k] + ys[k + 1]) + h / 8 * (fs[k] - fs[k + 1])
        dym = 1.5 / h * (ys[k + 1] - ys[k]) - 0.25 * (fs[k] + fs[k + 1])
        out[k] = float(np.max(np.abs(dym - rhs(t[k] + h / 2, ym))))
    return out


def integrate_apath(spec, x0, a, N: int, box: float | None = 1e8) -> PathSample:
    """Solve dx/dt = rho(x) a(t) on [0, 1] with N fourth-order steps."""
    side = _spec_side(spec)
    if N < 2:
        raise ValueError("N must be at least 2")
    drive = _driver(a, N, side.r, "a")
    x0 = np.asarray(x0, dtype=float).reshape(side.n)

    def rhs(t, x):
        return side.anchor_values(x[None, :])[0] @ drive(t)

    try:
        t, xs, fs = rk4(rhs, x0, N, box=box)
    except BlowUpError as err:
        tt, xs = err.partial
        err.partial = PathSample(tt, xs, np.array([drive(s) for s in tt])) if len(tt) >= 3 else None
        raise
    avals = np.array([drive(s) for s in t])
    return PathSample(t, xs, avals, defect=_midpoint_defect(rhs, t, xs, fs))


def integrate_cotangent_path(spec, x0, b0, a, p, N: int, box: float | None = 1e8) -> PathSample:
    """Integrate the cotangent lift of an A-path driven by (a(t), p(t))."""
    side = _spec_side(spec)
    n, r = side.n, side.r
    if N < 2:
        raise ValueError("N must be at least 2")
    drive_a = _driver(a, N, r, "a")
    drive_p = _driver(p, N, n, "p")
    y0 = np.concatenate([np.asarray(x0, float).reshape(n), np.asarray(b0, float).reshape(r)])

    def rhs(t, y):
        x, b = y[:n], y[n:]
        pt = x[None, :]
        rho = side.anchor_values(pt)[0]
        c = side.bracket_values(pt)[0]
        av, pv = drive_a(t), drive_p(t)
        dx = rho @ av
        # c[alpha, beta, gamma] = c^gamma_{alpha beta}
        db = -rho.T @ pv - np.einsum("abg,g,b->a", c, b, av)
        return np.concatenate([dx, db])

    try:
        t, ys, fs = rk4(rhs, y0, N, box=box)
    except BlowUpError as err:
        tt, ys = err.partial
        err.partial = None
        if len(tt) >= 3:
            err.partial = PathSample(
                tt, ys[:, :n], np.array([drive_a(s) for s in tt]), ys[:, n:], np.array([drive_p(s) for s in tt])
            )
        raise
    avals = np.array([drive_a(s) for s in t])
    pvals = np.array([drive_p(s) for s in t])
    return PathSample(t, ys[:, :n], avals, ys[:, n:], pvals, defect=_midpoint_defect(rhs, t, ys, fs))


# ----------------------------------------------------------------------------
# constraint surface


def to_constraint_fields(sample: PathSample):
    """Orientation map (x, a, b, p) -> (X, Adot, B, Pdot) = (x, -a, b, -p)."""
    if sample.b is None or sample.p is None:
        raise ValueError("constraint fields need the cotangent layers b and p")
    return sample.x.copy(), -sample.a, sample.b.copy(), -sample.p


def from_constraint_fields(t, X, Adot, B, Pdot) -> PathSample:
    return PathSample(np.asarray(t, float), np.asarray(X, float), -np.asarray(Adot, float), np.asarray(B, float), -np.asarray(Pdot, float))


@dataclass
class ConstraintResidualReport:
    """Per-node residuals of the two constraint families.

    ``path`` is d_t X + rho Adot (shape (N+1, n)); ``lift`` is
    d_t B - rho^T Pdot + c^g_{beta alpha} Adot^beta B_g (shape (N+1, r)).
    ``boundary`` holds max |A|, |P| at t = 0, 1 when those layers are given.
    """

    path: np.ndarray
    lift: np.ndarray
    boundary: dict[str, float] | None = None

    @property
    def max_path(self) -> float:
        return float(np.max(np.abs(self.path)))

    @property
    def max_lift(self) -> float:
        return float(np.max(np.abs(self.lift)))

    @property
    def max_residual(self) -> float:
        return max(self.max_path, self.max_lift)


def coisotropic_residual(spec, t, X, Adot, B, Pdot, A=None, P=None) -> ConstraintResidualReport:
    """Residuals of the constraint equations for per-node field tables.

    Time derivatives are second-order finite differences (central inside,
    one-sided at the ends).
    """
    side = _spec_side(spec)
    t = np.asarray(t, dtype=float)
    X, Adot, B, Pdot = (np.asarray(v, dtype=float) for v in (X, Adot, B, Pdot))
    m = len(t)
    shapes = {"X": (X, side.n), "Adot": (Adot, side.r), "B": (B, side.r), "Pdot": (Pdot, side.n)}
    for name, (arr, width) in shapes.items():
        if arr.shape != (m, width):
            raise ValueError(f"layer {name} has shape {arr.shape}, expected {(m, width)}")
    rho = side.anchor_values(X)
    c = side.bracket_values(X)
    dX = np.gradient(X, t, axis=0, edge_order=2)
    dB = np.gradient(B, t, axis=0, edge_order=2)
    path = dX + np.einsum("mia,ma->mi", rho, Adot)
    # c[m, beta, alpha, gamma] = c^gamma_{beta alpha}
    lift = dB - np.einsum("mia,mi->ma", rho, Pdot) + np.einsum("mbag,mb,mg->ma", c, Adot, B)
    boundary = None
    if A is not None or P is not None:
        boundary = {}
        if A is not None:
            A = np.asarray(A, dtype=float)
            boundary["A"] = float(max(np.max(np.abs(A[0])), np.max(np.abs(A[-1]))))
        if P is not None:
            P = np.asarray(P, dtype=float)
            boundary["P"] = float(max(np.max(np.abs(P[0])), np.max(np.abs(P[-1]))))
    return ConstraintResidualReport(path, lift, boundary)


# ----------------------------------------------------------------------------
# CSV


def write_csv(sample: PathSample, path) -> None:
    """Columns t, x1.., a1.., b1.., p1.. (cotangent layers only if present)."""
    cols = [("t", sample.t[:, None]), ("x", sample.x), ("a", sample.a)]
    if sample.b is not None:
        cols.append(("b", sample.b))
    if sample.p is not None:
        cols.append(("p", sample.p))
    header = []
    for name, arr in cols:
        header += [name] if name == "t" else [f"{name}{k + 1}" for k in range(arr.shape[1])]
    data = np.hstack([arr for _, arr in cols])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in data:
            w.writerow([format(float(v), ".17g") for v in row])


def read_csv(path) -> PathSample:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array([[float(v) for v in row] for row in rows[1:]])
    layers: dict[str, list[int]] = {}
    for k, name in enumerate(header):
        layers.setdefault(name.rstrip("0123456789"), []).append(k)
    get = lambda key: body[:, layers[key]] if key in layers else None  # noqa: E731
    return PathSample(body[:, 0], get("x"), get("a"), get("b"), get("p"))
