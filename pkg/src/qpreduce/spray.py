"""Poisson sprays, their flows and the realization form omega_Z.

Points of T*M are stored as y = (x, b) in R^{2n}.  The canonical form is
omega_can = db_i ^ dx^i, i.e. omega_can(u, v) = u_b . v_x - u_x . v_b, with
matrix OMEGA_CAN = [[0, -I], [I, 0]] in (x, b) order.

A spray Z(x, b) = (pi^{ji}(x) b_j, V(x, b)) has horizontal part forced by the
projection axiom and a vertical part V that must be fibrewise quadratic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .paths import BlowUpError
from .structures import PoissonSpec

__all__ = [
    "SprayField",
    "SprayFlowResult",
    "RealizationForm",
    "PoissonMapReport",
    "SprayLift",
    "default_spray",
    "canonical_matrix",
    "flow_with_jacobian",
    "apath_property_check",
    "omega_Z",
    "omega_Z_constant",
    "poisson_bivector",
    "poisson_map_residual",
    "spray_section_lift",
    "lift_constraint_fields",
    "closedness_defect",
    "gauss_legendre",
]


def canonical_matrix(n: int) -> np.ndarray:
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, -I], [I, Z]])


def gauss_legendre(Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Q-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(Q)
    return (x + 1) / 2, w / 2


@dataclass(frozen=True)
class SprayField:
    """``vertical`` maps a fibre index i to a formula in (x1..xn, x{n+1}..x{2n})
    where the last n variables are b_1..b_n."""

    poisson: PoissonSpec
    vertical: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.poisson.n

    def __post_init__(self):
        for i, node in self.vertical.items():
            if not 0 <= i < self.n:
                raise ValueError(f"vertical component index {i + 1} out of range")
            if ex.max_var_index(node) >= 2 * self.n:
                raise ValueError("vertical formulas may only use x1..x{2n}")

    def evaluate(self, y: np.ndarray, with_jacobian: bool = False):
        """Z(y) for y of shape (m, 2n); optionally also DZ(y) (m, 2n, 2n)."""
        n = self.n
        x, b = y[:, :n], y[:, n:]
        if with_jacobian:
            P, dP = self.poisson.arrays(x)
        else:
            P = self.poisson.matrix(x)
        # dx^i = pi^{ji} b_j
        dx = np.einsum("mji,mj->mi", P, b)
        db = np.zeros_like(b)
        D = None
        if with_jacobian:
            D = np.zeros((len(y), 2 * n, 2 * n))
            D[:, :n, :n] = np.einsum("mjik,mj->mik", dP, b)
            D[:, :n, n:] = P.transpose(0, 2, 1)
        for i, node in self.vertical.items():
            if with_jacobian:
                v, g = ex.gradient_batch(node, y)
                D[:, n + i, :] = g
            else:
                v = ex.evaluate_batch(node, y)
            db[:, i] = v
        out = np.concatenate([dx, db], axis=1)
        return (out, D) if with_jacobian else out

    def homogeneity_defect(self, points, scales=(0.5, 2.0)) -> float:
        """Max relative defect of H(x, s b) = s H and V(x, s b) = s^2 V."""
        y = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.n
        base = self.evaluate(y)
        worst = 0.0
        for s in scales:
            ys = y.copy()
            ys[:, n:] *= s
            out = self.evaluate(ys)
            for part, power in ((slice(0, n), 1), (slice(n, 2 * n), 2)):
                want = s**power * base[:, part]
                err = np.abs(out[:, part] - want) / np.maximum(1.0, np.abs(want))
                worst = max(worst, float(np.max(err, initial=0.0)))
        return worst


def default_spray(p: PoissonSpec) -> SprayField:
    """Z(x, b) = (pi^{ji}(x) b_j, 0)."""
    return SprayField(p, {})


# ----------------------------------------------------------------------------
# flow and variational equation


@dataclass
class SprayFlowResult:
    """Flow points ``y[k]`` and Jacobians ``J[k]`` at ``times[k]``.

    Leading batch axes of the initial data are kept: y has shape
    (K, *batch, 2n) and J (K, *batch, 2n, 2n).
    """

    times: np.ndarray
    y: np.ndarray
    J: np.ndarray

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12:
            raise KeyError(f"time {t} is not on the flow grid")
        return k

    def at(self, t: float):
        k = self.index(t)
        return self.y[k], self.J[k]

    @property
    def endpoint(self):
        return self.y[-1], self.J[-1]


def _merged_grid(t1: float, N: int, extra) -> np.ndarray:
    grid = np.linspace(0.0, t1, N + 1)
    if extra is not None and len(extra):
        extra = np.asarray(extra, dtype=float)
        if np.any((extra < min(0.0, t1) - 1e-15) | (extra > max(0.0, t1) + 1e-15)):
            raise ValueError("requested output times lie outside the integration interval")
        grid = np.concatenate([grid, extra])
        grid = np.unique(np.round(grid, 15))
        if t1 < 0:
            grid = grid[::-1]
    return grid


def flow_with_jacobian(Z: SprayField, y0, t: float = 1.0, N: int = 200, extra_times=None, box: float = 10.0) -> SprayFlowResult:
    """Integrate y' = Z(y) and J' = DZ(y) J, J(0) = I, to time ``t``.

    Fourth-order steps on the uniform N-step grid, refined so that every
    time in ``extra_times`` is a grid node.  Raises BlowUpError when the
    flow leaves ``max |y| <= box``.
    """
    if abs(t) > 1.0 + 1e-15:
        raise ValueError("flow time must satisfy |t| <= 1")
    y0 = np.asarray(y0, dtype=float)
    n2 = 2 * Z.n
    if y0.shape[-1] != n2:
        raise ValueError(f"initial points must have {n2} components")
    batch = y0.shape[:-1]
    y = y0.reshape(-1, n2).copy()
    m = y.shape[0]
    J = np.broadcast_to(np.eye(n2), (m, n2, n2)).copy()
    grid = _merged_grid(t, N, extra_times)

    def rhs(yy, JJ):
        f, D = Z.evaluate(yy, with_jacobian=True)
        return f, D @ JJ

    ys = np.empty((len(grid), m, n2))
    Js = np.empty((len(grid), m, n2, n2))
    ys[0], Js[0] = y, J
    for k in range(len(grid) - 1):
        h = grid[k + 1] - grid[k]
        k1y, k1J = rhs(y, J)
        k2y, k2J = rhs(y + h / 2 * k1y, J + h / 2 * k1J)
        k3y, k3J = rhs(y + h / 2 * k2y, J + h / 2 * k2J)
        k4y, k4J = rhs(y + h * k3y, J + h * k3J)
        y = y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        J = J + h / 6 * (k1J + 2 * k2J + 2 * k3J + k4J)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(J))) or np.max(np.abs(y)) > box:
            raise BlowUpError(f"spray flow left the box |y| <= {box} at t = {grid[k + 1]:.6g}", k + 1)
        ys[k + 1], Js[k + 1] = y, J
    return SprayFlowResult(grid, ys.reshape((len(grid),) + batch + (n2,)), Js.reshape((len(grid),) + batch + (n2, n2)))


def apath_property_check(Z: SprayField, y0, N: int = 200, box: float = 10.0) -> float:
    """Max over cell midpoints of |dx/dt - pi#(x) b| along the flow of y0.

    The curve is the cubic Hermite interpolant of the flow nodes, whose
    midpoint derivative is accurate to the order of the integrator.
    """
    flow = flow_with_jacobian(Z, np.asarray(y0, float).reshape(1, -1), 1.0, N, box=box)
    n = Z.n
    ys = flow.y[:, 0, :]
    fs = Z.evaluate(ys)
    h = 1.0 / N
    ym = 0.5 * (ys[:-1] + ys[1:]) + h / 8 * (fs[:-1] - fs[1:])
    dym = 1.5 / h * (ys[1:] - ys[:-1]) - 0.25 * (fs[:-1] + fs[1:])
    P, _ = Z.poisson.arrays(ym[:, :n])
    sharp = np.einsum("mji,mj->mi", P, ym[:, n:])
    return float(np.max(np.abs(dym[:, :n] - sharp)))


# ----------------------------------------------------------------------------
# realization form


@dataclass
class RealizationForm:
    point: np.ndarray
    matrix: np.ndarray
    rule: str = "gauss-legendre"
    nodes: int = 16
    steps: int = 500


def omega_Z(Z: SprayField, y, Q: int = 16, N: int = 500, box: float = 10.0):
    """omega_Z = int_0^1 phi_t^* omega_can dt by Gauss-Legendre quadrature.

    ``y`` is one point (returns a RealizationForm) or a batch (m, 2n)
    (returns an array of matrices).
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    ts, ws = gauss_legendre(Q)
    flow = flow_with_jacobian(Z, y.reshape(-1, y.shape[-1]), 1.0, N, extra_times=ts, box=box)
    Om = canonical_matrix(Z.n)
    acc = np.zeros((flow.J.shape[1],) + Om.shape)
    for tk, wk in zip(ts, ws):
        Jk = flow.J[flow.index(tk)]
        acc += wk * np.einsum("mki,kl,mlj->mij", Jk, Om, Jk)
    acc = 0.5 * (acc - acc.transpose(0, 2, 1))
    if single:
        return RealizationForm(y.copy(), acc[0], "gauss-legendre", Q, N)
    return acc


def omega_Z_constant(pi_matrix: np.ndarray) -> np.ndarray:
    """Closed form for constant pi: OMEGA_CAN plus half the fibre block.

    The fibre block is pi^{ji} db_i ^ db_j, whose matrix is Pi^T - Pi with
    Pi[i, j] = pi^{ij}; half of it is -Pi.
    """
    Pi = np.asarray(pi_matrix, dtype=float)
    n = Pi.shape[0]
    out = canonical_matrix(n)
    out[n:, n:] += 0.5 * (Pi.T - Pi)
    return out


def poisson_bivector(omega: np.ndarray) -> np.ndarray:
    """Poisson bivector of a symplectic matrix in the convention where the
    canonical form gives {b_i, x^j} = delta: P = -omega^{-1}."""
    return -np.linalg.inv(omega)


@dataclass
class PoissonMapReport:
    differences: np.ndarray  # per included sample
    excluded: list[int]  # samples where omega_Z is (numerically) singular
    max_residual: float


def poisson_map_residual(Z: SprayField, samples, functions=None, Q: int = 16, N: int = 500, box: float = 10.0, cond_limit: float = 1e10) -> PoissonMapReport:
    """Compare {f o p, g o p}_{omega_Z} with {f, g}_pi at p(sample).

    ``functions`` is a list of formulas in x1..xn; all pairs are checked.
    The default is the coordinate functions.
    """
    y = np.atleast_2d(np.asarray(samples, dtype=float))
    n = Z.n
    if functions is None:
        functions = [ex.var(i) for i in range(n)]
    omegas = omega_Z(Z, y, Q, N, box)
    P, _ = Z.poisson.arrays(y[:, :n])
    grads = [ex.gradient_batch(f, y[:, :n])[1] for f in functions]
    diffs, excluded = [], []
    for s in range(len(y)):
        if np.linalg.cond(omegas[s]) > cond_limit:
            excluded.append(s)
            continue
        PU = poisson_bivector(omegas[s])
        worst = 0.0
        for a in range(len(functions)):
            for b in range(a + 1, len(functions)):
                da = np.concatenate([grads[a][s], np.zeros(n)])
                db = np.concatenate([grads[b][s], np.zeros(n)])
                lifted = da @ PU @ db
                base = grads[a][s] @ P[s] @ grads[b][s]
                worst = max(worst, abs(lifted - base))
        diffs.append(worst)
    diffs = np.array(diffs)
    return PoissonMapReport(diffs, excluded, float(np.max(diffs, initial=0.0)))


def closedness_defect(Z: SprayField, points, h: float = 1e-3, Q: int = 16, N: int = 200, box: float = 10.0) -> float:
    """Max |d omega_Z| over coordinate triples by central differences."""
    y = np.atleast_2d(np.asarray(points, dtype=float))
    m, n2 = y.shape
    shifted = []
    for k in range(n2):
        e = np.zeros(n2)
        e[k] = h
        shifted += [y + e, y - e]
    om = omega_Z(Z, np.concatenate(shifted), Q, N, box).reshape(n2, 2, m, n2, n2)
    dom = (om[:, 0] - om[:, 1]) / (2 * h)  # dom[k, m, i, j] = d_k omega_ij
    cyc = dom.transpose(1, 0, 2, 3)  # [m, k, i, j]
    d = cyc + cyc.transpose(0, 2, 3, 1) + cyc.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(d)))


# ----------------------------------------------------------------------------
# section lift


@dataclass
class SprayLift:
    """Lifted fields on the time grid ``t``.

    X, Bdot: (T, *batch, n) from the flow point; A, Pdot: (T, *batch, k, n)
    from the Jacobian applied to k tangent vectors.
    """

    t: np.ndarray
    X: np.ndarray
    Bdot: np.ndarray
    A: np.ndarray
    Pdot: np.ndarray


def spray_section_lift(Z: SprayField, Y, tangents, N_t: int, substeps: int = 1, box: float = 10.0, t1: float = 1.0) -> SprayLift:
    """(X, Bdot)(t) = phi_t(Y) and (A, Pdot)(t) = J(t) . w for each tangent w.

    ``Y`` has shape (*batch, 2n) and ``tangents`` (*batch, k, 2n).  Output is
    on the uniform grid of [0, t1] with N_t cells; the flow uses
    N_t * substeps steps.
    """
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(tangents, dtype=float)
    n = Z.n
    flow = flow_with_jacobian(Z, Y, t1, N_t * substeps, box=box)
    sel = slice(None, None, substeps)
    ys, Js = flow.y[sel], flow.J[sel]
    lifted = np.einsum("t...ij,...kj->t...ki", Js, W)
    return SprayLift(flow.times[sel], ys[..., :n], ys[..., n:], lifted[..., :n], lifted[..., n:])


def lift_constraint_fields(lift: SprayLift, which: int = 0):
    """Constraint-surface fields (X, Adot, B, Pdot) of the cotangent algebroid
    T*_pi M carried by a lift of a single base point.

    The lift's names refer to T*M; on the algebroid side the fibre point is
    the dt-density with the orientation map applied, and the variation of x
    is the B field:  (X, -Bdot, A_w, -Pdot_w) for tangent vector ``which``.
    """
    if lift.X.ndim != 2:
        raise ValueError("constraint fields are built from a lift of a single point")
    return lift.X, -lift.Bdot, lift.A[:, which, :], -lift.Pdot[:, which, :]
