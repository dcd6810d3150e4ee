"""Classical actions of the Poisson and Courant sigma models on a lattice torus.

Fields on the surface live on a periodic nx-by-ny grid.  A vertex field has
shape (..., nx, ny, d); an edge field (..., 2, nx, ny, d) where component mu
sits on the edge from (i, j) to (i, j) + e_mu.  Every action is a sum over
plaquettes of a local integrand built from plaquette samples:

* a vertex field is sampled at the average of the four corners;
* an edge field gives the 1-form whose mu-component is the average over the
  two mu-edges of the plaquette;
* the differential of a vertex field is the edge field of forward
  differences.

On bilinear interpolants this makes the plaquette sum of dF ^ dG an exact
boundary term, so discrete Stokes holds on the closed torus.

The wedge of two 1-forms is alpha ^ beta = alpha_0 beta_1 - alpha_1 beta_0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .spray import SprayField, canonical_matrix, flow_with_jacobian, omega_Z, spray_section_lift
from .structures import BialgebroidSpec, LieAlgebroidSpec, PoissonSpec

__all__ = [
    "LatticeSurface",
    "PSMPointData",
    "IdentityCheck",
    "CSMFieldGrid",
    "ReductionCheck",
    "BFFields",
    "BFReductionCheck",
    "wedge",
    "pointwise_identity_check",
    "psm_classical_action",
    "csm_action_parts",
    "csm_restricted_action",
    "csm_constraint_residuals",
    "reduction_equality_check",
    "bf_reduction_check",
    "effective_poisson",
    "trivial_a_example",
    "random_psm_fields",
    "random_bf_fields",
    "export_fields",
    "import_fields",
]


# ----------------------------------------------------------------------------
# lattice


@dataclass(frozen=True)
class LatticeSurface:
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("the torus needs at least one vertex in each direction")

    @classmethod
    def of(cls, vertex_field: np.ndarray) -> "LatticeSurface":
        return cls(vertex_field.shape[-3], vertex_field.shape[-2])

    @property
    def plaquettes(self) -> int:
        return self.nx * self.ny

    def _check(self, F, edge: bool):
        F = np.asarray(F, dtype=float)
        if F.ndim < 3 or F.shape[-3:-1] != (self.nx, self.ny) or (edge and (F.ndim < 4 or F.shape[-4] != 2)):
            kind = "edge (..., 2, nx, ny, d)" if edge else "vertex (..., nx, ny, d)"
            raise ValueError(f"expected a {kind} field on a {self.nx}x{self.ny} torus, got shape {F.shape}")
        return F

    def point(self, F) -> np.ndarray:
        """Corner average of a vertex field, flattened to (..., P, d)."""
        F = self._check(F, edge=False)
        Fx = np.roll(F, -1, axis=-3)
        avg = 0.25 * (F + Fx + np.roll(F, -1, axis=-2) + np.roll(Fx, -1, axis=-2))
        return avg.reshape(avg.shape[:-3] + (self.plaquettes, avg.shape[-1]))

    def d(self, F) -> np.ndarray:
        """Forward differences of a vertex field as an edge field."""
        F = self._check(F, edge=False)
        return np.stack([np.roll(F, -1, axis=-3) - F, np.roll(F, -1, axis=-2) - F], axis=-4)

    def one_form(self, E) -> np.ndarray:
        """Plaquette 1-form of an edge field, shape (..., P, 2, d)."""
        E = self._check(E, edge=True)
        c0 = 0.5 * (E[..., 0, :, :, :] + np.roll(E[..., 0, :, :, :], -1, axis=-2))
        c1 = 0.5 * (E[..., 1, :, :, :] + np.roll(E[..., 1, :, :, :], -1, axis=-3))
        out = np.stack([c0, c1], axis=-2)  # (..., nx, ny, 2, d)
        return out.reshape(out.shape[:-4] + (self.plaquettes, 2, out.shape[-1]))

    def plaquette_scalar(self, F) -> np.ndarray:
        """A 2-form stored per plaquette, indexed like vertices: (..., P, d)."""
        F = self._check(F, edge=False)
        return F.reshape(F.shape[:-3] + (self.plaquettes, F.shape[-1]))


def wedge(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """sum_i alpha_0^i beta_1^i - alpha_1^i beta_0^i over trailing (2, d) axes."""
    return np.einsum("...i,...i->...", alpha[..., 0, :], beta[..., 1, :]) - np.einsum(
        "...i,...i->...", alpha[..., 1, :], beta[..., 0, :]
    )


def _bilinear_wedge(M: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """M(alpha_0, beta_1) - M(alpha_1, beta_0) for a pointwise matrix M."""
    return np.einsum("...i,...ij,...j->...", alpha[..., 0, :], M, beta[..., 1, :]) - np.einsum(
        "...i,...ij,...j->...", alpha[..., 1, :], M, beta[..., 0, :]
    )


# ----------------------------------------------------------------------------
# pointwise identities


@dataclass
class PSMPointData:
    """Pointwise PSM data in T*M: the target point Y = (x, b), the two
    components of the 1-form V and of dY, each a vector in R^{2n}.

    Leading batch axes are allowed: Y (..., 2n), V and dY (..., 2, 2n).
    """

    Y: np.ndarray
    V: np.ndarray
    dY: np.ndarray

    def __post_init__(self):
        self.Y, self.V, self.dY = (np.asarray(a, dtype=float) for a in (self.Y, self.V, self.dY))
        n2 = self.Y.shape[-1]
        want = self.Y.shape[:-1] + (2, n2)
        if n2 % 2 or self.V.shape != want or self.dY.shape != want:
            raise ValueError(f"expected Y (..., 2n) and V, dY of shape {want}")
        if not (np.all(np.isfinite(self.Y)) and np.all(np.isfinite(self.V)) and np.all(np.isfinite(self.dY))):
            raise ValueError("point data must be finite")

    @property
    def tangents(self) -> np.ndarray:
        return np.concatenate([self.V, self.dY], axis=-2)


@dataclass
class IdentityCheck:
    """Both sides of the two pointwise identities; arrays follow the batch."""

    lhs_pairing: np.ndarray
    rhs_pairing: np.ndarray
    lhs_quadratic: np.ndarray
    rhs_quadratic: np.ndarray

    @property
    def residuals(self) -> tuple[float, float]:
        return (
            float(np.max(np.abs(self.lhs_pairing - self.rhs_pairing))),
            float(np.max(np.abs(self.lhs_quadratic - self.rhs_quadratic))),
        )

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def pointwise_identity_check(Z: SprayField, d: PSMPointData, t: float, N: int = 500, box: float = 10.0) -> IdentityCheck:
    """Compare phi_t^* omega_can against the lifted CSM integrand at time t.

    The left sides use J(t)^T OMEGA_CAN J(t) from the variational equation:
    omega_t(V_0, dY_1) - omega_t(V_1, dY_0) and omega_t(V_0, V_1).  The right
    sides take the section lift at t, with (A, Pdot) = J V and
    (dX, dBdot) = J dY, and form Pdot ^ dX + dBdot ^ A and -A ^ Pdot.
    """
    n = Z.n
    flow = flow_with_jacobian(Z, d.Y, t, N, box=box)
    J = flow.J[-1]
    om = np.swapaxes(J, -1, -2) @ canonical_matrix(n) @ J
    lhs1 = _bilinear_wedge(om, d.V, d.dY)
    lhs2 = np.einsum("...i,...ij,...j->...", d.V[..., 0, :], om, d.V[..., 1, :])

    lift = spray_section_lift(Z, d.Y, d.tangents, N, box=box, t1=t)
    A, Pdot = lift.A[-1][..., :2, :], lift.Pdot[-1][..., :2, :]
    dX, dBdot = lift.A[-1][..., 2:, :], lift.Pdot[-1][..., 2:, :]
    rhs1 = wedge(Pdot, dX) + wedge(dBdot, A)
    rhs2 = -wedge(A, Pdot)
    return IdentityCheck(lhs1, rhs1, lhs2, rhs2)


# ----------------------------------------------------------------------------
# PSM


def psm_classical_action(source, Y, V, Q: int = 16, N: int = 500, box: float = 10.0) -> float:
    """Plaquette-summed classical PSM action.

    With a PoissonSpec: V is a covector-valued 1-form and the integrand is
    V ^ dY + pi^{ij}(Y) V_0i V_1j.  With a SprayField: Y lies in T*M, V is a
    tangent-valued 1-form and the symplectic form omega_Z (Q quadrature
    nodes, N flow steps) replaces both the pairing and pi:
    omega_Z(V_0, dY_1) - omega_Z(V_1, dY_0) + omega_Z(V_0, V_1).
    """
    lat = LatticeSurface.of(np.asarray(Y))
    Yp = lat.point(Y)
    Vp = lat.one_form(V)
    dYp = lat.one_form(lat.d(Y))
    if Vp.shape != dYp.shape:
        raise ValueError("V must have the same target dimension as Y")
    if isinstance(source, PoissonSpec):
        if Yp.shape[-1] != source.n:
            raise ValueError(f"fields have dimension {Yp.shape[-1]}, the Poisson structure {source.n}")
        P = source.matrix(Yp)
        dens = wedge(Vp, dYp) + np.einsum("pi,pij,pj->p", Vp[:, 0], P, Vp[:, 1])
    elif isinstance(source, SprayField):
        if Yp.shape[-1] != 2 * source.n:
            raise ValueError(f"fields must live in T*M of dimension {2 * source.n}")
        om = omega_Z(source, Yp, Q, N, box)
        dens = _bilinear_wedge(om, Vp, dYp) + np.einsum("pi,pij,pj->p", Vp[:, 0], om, Vp[:, 1])
    else:
        raise TypeError("source must be a PoissonSpec or a SprayField")
    return float(np.sum(dens))


# ----------------------------------------------------------------------------
# CSM on Sigma x I


_LAYERS_0 = ("X", "Bdot", "Pm")
_LAYERS_1 = ("A", "Pdot", "dX", "dBdot", "Bm")


@dataclass
class CSMFieldGrid:
    """Plaquette-sampled CSM fields on a time grid t[0..T-1].

    In the default "time-major" layout X, Bdot have shape (T, P, n) and
    A, Pdot, dX, dBdot shape (T, P, 2, n); dX and dBdot are the spatial
    differentials.  Pm (T, P, n) and Bm (T, P, 2, n) are the optional
    multiplier layers.  The "site-major" layout swaps the first two axes.
    """

    t: np.ndarray
    X: np.ndarray
    Bdot: np.ndarray
    A: np.ndarray
    Pdot: np.ndarray
    dX: np.ndarray
    dBdot: np.ndarray
    Pm: np.ndarray | None = None
    Bm: np.ndarray | None = None
    layout: str = "time-major"

    def __post_init__(self):
        if self.layout not in ("time-major", "site-major"):
            raise ValueError(f"unknown layout {self.layout!r}")
        self.t = np.asarray(self.t, dtype=float)
        T = len(self.t)
        if T < 3:
            raise ValueError("the time grid needs at least three nodes")
        head = self.X.shape[:2]
        TP = head if self.layout == "time-major" else head[::-1]
        if TP[0] != T:
            raise ValueError(f"layer X has {TP[0]} time nodes, the grid {T}")
        n = self.X.shape[-1]
        for name in _LAYERS_0 + _LAYERS_1:
            arr = getattr(self, name)
            if arr is None:
                continue
            want = head + ((n,) if name in _LAYERS_0 else (2, n))
            if arr.shape != want:
                raise ValueError(f"layer {name} has shape {arr.shape}, expected {want}")

    @property
    def n(self) -> int:
        return self.X.shape[-1]

    def canonical(self) -> dict:
        """Time-major contiguous copies of all layers."""
        out = {}
        for name in _LAYERS_0 + _LAYERS_1:
            arr = getattr(self, name)
            if arr is None:
                out[name] = None
            elif self.layout == "site-major":
                out[name] = np.ascontiguousarray(np.moveaxis(arr, 0, 1))
            else:
                out[name] = np.ascontiguousarray(arr)
        return out

    def reindexed(self, layout: str) -> "CSMFieldGrid":
        """The same fields stored in the other layout."""
        if layout == self.layout:
            return self
        layers = self.canonical()
        if layout == "site-major":
            layers = {k: None if v is None else np.ascontiguousarray(np.moveaxis(v, 0, 1)) for k, v in layers.items()}
        return CSMFieldGrid(self.t.copy(), layout=layout, **layers)

    @classmethod
    def from_vertex_edge_fields(cls, t, X, Bdot, A, Pdot, Pm=None, Bm=None) -> "CSMFieldGrid":
        """Sample lattice fields (time axis first) at plaquettes.

        X, Bdot: (T, nx, ny, n) vertex fields; A, Pdot: (T, 2, nx, ny, n)
        edge fields; Pm: (T, nx, ny, n) per plaquette; Bm an edge field.
        """
        lat = LatticeSurface.of(np.asarray(X))
        return cls(
            np.asarray(t, dtype=float),
            lat.point(X),
            lat.point(Bdot),
            lat.one_form(A),
            lat.one_form(Pdot),
            lat.one_form(lat.d(X)),
            lat.one_form(lat.d(Bdot)),
            None if Pm is None else lat.plaquette_scalar(Pm),
            None if Bm is None else lat.one_form(Bm),
        )


def _trapezoid(t: np.ndarray, f: np.ndarray) -> float:
    w = np.empty(len(t))
    h = np.diff(t)
    w[0], w[-1] = h[0] / 2, h[-1] / 2
    w[1:-1] = (h[:-1] + h[1:]) / 2
    return float(np.sum(w * f))


def _constraint_densities(poisson: PoissonSpec, t, F):
    """Pointwise constraint expressions (path, lift) on the canonical layers."""
    T, P, n = F["X"].shape
    pts = F["X"].reshape(T * P, n)
    Pi, dPi = poisson.arrays(pts)
    Pi, dPi = Pi.reshape(T, P, n, n), dPi.reshape(T, P, n, n, n)
    dtX = np.gradient(F["X"], t, axis=0, edge_order=2)
    dtA = np.gradient(F["A"], t, axis=0, edge_order=2)
    path = dtX + np.einsum("tpji,tpj->tpi", Pi, F["Bdot"])
    lift = (
        dtA
        - np.einsum("tpij,tpmj->tpmi", Pi, F["Pdot"])
        + np.einsum("tpjik,tpj,tpmk->tpmi", dPi, F["Bdot"], F["A"])
    )
    return path, lift


def csm_action_parts(poisson: PoissonSpec, grid: CSMFieldGrid) -> tuple[float, float]:
    """(main, multiplier) parts of the gauge-fixed CSM action.

    main = int_I sum_p  Pdot ^ dX + dBdot ^ A - A ^ Pdot
    multiplier = int_I sum_p  Pm . (d_t X + pi^{ji} Bdot_j)
                  + Bm ^ (d_t A - pi^{ij} Pdot_j + d_k pi^{ji} Bdot_j A^k)
    Time derivatives are second-order differences, the t-integral is the
    trapezoid rule on the grid.
    """
    if grid.n != poisson.n:
        raise ValueError(f"grid has dimension {grid.n}, the Poisson structure {poisson.n}")
    F = grid.canonical()
    t = grid.t
    main_density = wedge(F["Pdot"], F["dX"]) + wedge(F["dBdot"], F["A"]) - wedge(F["A"], F["Pdot"])
    main = _trapezoid(t, np.sum(main_density, axis=1))
    if F["Pm"] is None and F["Bm"] is None:
        return main, 0.0
    path, lift = _constraint_densities(poisson, t, F)
    mult_density = np.zeros(main_density.shape)
    if F["Pm"] is not None:
        mult_density += np.einsum("tpi,tpi->tp", F["Pm"], path)
    if F["Bm"] is not None:
        mult_density += wedge(F["Bm"], lift)
    return main, _trapezoid(t, np.sum(mult_density, axis=1))


def csm_restricted_action(poisson: PoissonSpec, grid: CSMFieldGrid) -> float:
    main, mult = csm_action_parts(poisson, grid)
    return main + mult


def csm_constraint_residuals(poisson: PoissonSpec, grid: CSMFieldGrid) -> tuple[float, float]:
    """Max |.| of the two expressions multiplied by Pm and Bm."""
    path, lift = _constraint_densities(poisson, grid.t, grid.canonical())
    return float(np.max(np.abs(path))), float(np.max(np.abs(lift)))


@dataclass
class ReductionCheck:
    csm: float
    psm: float
    grid: CSMFieldGrid | None = field(default=None, repr=False, compare=False)

    @property
    def difference(self) -> float:
        return abs(self.csm - self.psm)


def lifted_grid(Z: SprayField, Y, V, N_t: int, substeps: int = 1, box: float = 10.0) -> CSMFieldGrid:
    """CSM grid obtained by lifting plaquette samples of PSM fields on T*M."""
    lat = LatticeSurface.of(np.asarray(Y))
    Yp = lat.point(Y)
    Vp = lat.one_form(V)
    dYp = lat.one_form(lat.d(Y))
    lift = spray_section_lift(Z, Yp, np.concatenate([Vp, dYp], axis=-2), N_t, substeps, box)
    return CSMFieldGrid(
        lift.t, lift.X, lift.Bdot, lift.A[:, :, :2], lift.Pdot[:, :, :2], lift.A[:, :, 2:], lift.Pdot[:, :, 2:]
    )


def reduction_equality_check(Z: SprayField, Y, V, N_t: int = 200, Q: int = 16, N: int = 500, substeps: int = 1, box: float = 10.0) -> ReductionCheck:
    """CSM action of the lifted fields (multipliers 0) against PSM(omega_Z).

    Y is a vertex field in T*M (nx, ny, 2n) and V an edge field of tangent
    vectors (2, nx, ny, 2n).  Both sides sample the fields at plaquettes in
    the same way, so the difference measures only the t-quadrature of the
    lift and the flow error.
    """
    grid = lifted_grid(Z, Y, V, N_t, substeps, box)
    return ReductionCheck(csm_restricted_action(Z.poisson, grid), psm_classical_action(Z, Y, V, Q, N, box), grid)


# ----------------------------------------------------------------------------
# BF and trivial-A reductions
#
# t-lattice with N_t cells: fields carrying a time differential (Adot, Pdot)
# are per-cell increments, the others live on the N_t + 1 nodes.


@dataclass
class BFFields:
    """Adot: (N_t, nx, ny, r) vertex increments; B: (N_t+1, 2, nx, ny, r)
    edge values; optional multiplier A like B.  Trivial-A adds X
    (N_t+1, nx, ny, n), Pdot (N_t, 2, nx, ny, n) and the plaquette
    multiplier P (N_t+1, nx, ny, n)."""

    Adot: np.ndarray
    B: np.ndarray
    A: np.ndarray | None = None
    X: np.ndarray | None = None
    Pdot: np.ndarray | None = None
    P: np.ndarray | None = None

    @property
    def N_t(self) -> int:
        return self.Adot.shape[0]


@dataclass
class BFReductionCheck:
    case: str
    restricted: float
    effective: float
    constraint_violation: float  # max change along t of the fields the delta freezes

    @property
    def difference(self) -> float:
        return abs(self.restricted - self.effective)


def _linear_entries(bracket, offset: int) -> dict:
    """pi^{o+a, o+b} = c~^g_{ab} y^g with y^g the coordinate x_{o+g}."""
    entries: dict = {}
    for (a, b, g), node in bracket.items():
        term = ex.Binary("*", node, ex.var(offset + g))
        prev = entries.get((offset + a, offset + b))
        entries[(offset + a, offset + b)] = term if prev is None else ex.Binary("+", prev, term)
    return entries


def effective_poisson(spec: BialgebroidSpec) -> PoissonSpec:
    """Linear Poisson structure on A (coordinates x^i, y^alpha) induced by
    the dual algebroid: pi^{i, n+alpha} = rho~^i_alpha(x) and
    pi^{n+alpha, n+beta} = c~^{gamma}_{alpha beta}(x) y^gamma."""
    n, r = spec.n, spec.r
    entries = _linear_entries(spec.dual.bracket, n)
    for (i, a), node in spec.dual.anchor.items():
        entries[(i, n + a)] = node
    return PoissonSpec.build(n + r, entries, name="linear Poisson structure on A")


def _classify(spec) -> tuple[str, BialgebroidSpec]:
    if isinstance(spec, LieAlgebroidSpec):
        spec = BialgebroidSpec.from_algebroid(spec)
    if not spec.dual.is_zero() and not spec.primal.is_zero():
        raise ValueError("BF reductions need one of the two sides to vanish")
    if spec.dual.is_zero():
        if spec.primal.anchor:
            raise ValueError("the Lie algebra case needs a zero anchor")
        if spec.primal.bracket:
            raise ValueError(
                "a non-abelian Lie algebra reduces through the exchanged (coalgebra) form; pass spec.flip()"
            )
        return "abelian", spec
    depends_on_x = any(ex.variables(v) for v in list(spec.dual.anchor.values()) + list(spec.dual.bracket.values()))
    if not spec.dual.anchor and not depends_on_x:
        return "coalgebra", spec
    return "trivial-A", spec


def _cells(F: np.ndarray) -> np.ndarray:
    return 0.5 * (F[1:] + F[:-1])


def bf_reduction_check(spec, fields: BFFields) -> BFReductionCheck:
    """Restricted t-lattice action against the reduced PSM action.

    Cases follow the structure: "abelian" (a Lie algebra with zero bracket),
    "coalgebra" (zero A-side, constant dual bracket) and "trivial-A" (zero
    A-side over a genuine base).  The reduced fields are Y = sum_k Adot_k
    (and X) and V = B (and sum_k Pdot_k) at t = 0.  On fields that satisfy
    the delta constraints the two actions agree identically.
    """
    case, bi = _classify(spec)
    n, r = bi.n, bi.r
    Adot = np.asarray(fields.Adot, dtype=float)
    B = np.asarray(fields.B, dtype=float)
    lat = LatticeSurface.of(Adot)
    N_t = Adot.shape[0]
    if Adot.shape[-1] != r or B.shape != (N_t + 1, 2, lat.nx, lat.ny, r):
        raise ValueError("Adot must be (N_t, nx, ny, r) and B (N_t+1, 2, nx, ny, r)")
    Bc = lat.one_form(_cells(B))  # (N_t, P, 2, r)
    dA = lat.one_form(lat.d(Adot))
    Ap = lat.point(Adot)  # (N_t, P, r)
    dens = wedge(Bc, dA)
    violation = float(np.max(np.abs(np.diff(B, axis=0)), initial=0.0))
    if fields.A is not None:
        dens = dens + wedge(lat.one_form(_cells(np.asarray(fields.A, float))), lat.one_form(np.diff(B, axis=0)))

    Y = np.sum(Adot, axis=0)
    V = B[0]
    if case == "abelian":
        restricted = float(np.sum(dens))
        effective = psm_classical_action(PoissonSpec(r, {}), Y, V)
        return BFReductionCheck(case, restricted, effective, violation)

    if case == "coalgebra":
        c = bi.dual.bracket_values(np.zeros((1, n)))[0]  # c[a, b, g] = c~^{ab}_g
        dens = dens + np.einsum("abg,kpa,kpb,kpg->kp", c, Bc[..., 0, :], Bc[..., 1, :], Ap)
        restricted = float(np.sum(dens))
        lin = PoissonSpec.build(r, _linear_entries(bi.dual.bracket, 0))
        effective = psm_classical_action(lin, Y, V)
        return BFReductionCheck(case, restricted, effective, violation)

    # trivial-A
    if fields.X is None or fields.Pdot is None:
        raise ValueError("the trivial-A case needs X and Pdot layers")
    X = np.asarray(fields.X, dtype=float)
    Pdot = np.asarray(fields.Pdot, dtype=float)
    if X.shape != (N_t + 1, lat.nx, lat.ny, n) or Pdot.shape != (N_t, 2, lat.nx, lat.ny, n):
        raise ValueError("X must be (N_t+1, nx, ny, n) and Pdot (N_t, 2, nx, ny, n)")
    violation = max(violation, float(np.max(np.abs(np.diff(X, axis=0)), initial=0.0)))
    Xc = _cells(X)
    Xp = lat.point(Xc)  # (N_t, P, n)
    dX = lat.one_form(lat.d(Xc))
    Pp = lat.one_form(Pdot)  # (N_t, P, 2, n)
    flat = Xp.reshape(-1, n)
    rho = bi.dual.anchor_values(flat).reshape(Xp.shape[:2] + (n, r))  # rho~^i_alpha
    c = bi.dual.bracket_values(flat).reshape(Xp.shape[:2] + (r, r, r))
    BP = np.einsum("kpa,kpi->kpai", Bc[..., 0, :], Pp[..., 1, :]) - np.einsum("kpa,kpi->kpai", Bc[..., 1, :], Pp[..., 0, :])
    dens = (
        dens
        + wedge(Pp, dX)
        - np.einsum("kpia,kpai->kp", rho, BP)
        + np.einsum("kpabg,kpa,kpb,kpg->kp", c, Bc[..., 0, :], Bc[..., 1, :], Ap)
    )
    if fields.P is not None:
        Pm = lat.plaquette_scalar(_cells(np.asarray(fields.P, float)))
        dens = dens + np.einsum("kpi,kpi->kp", Pm, lat.point(np.diff(X, axis=0)))
    restricted = float(np.sum(dens))
    Yfull = np.concatenate([X[0], Y], axis=-1)
    Vfull = np.concatenate([np.sum(Pdot, axis=0), V], axis=-1)
    effective = psm_classical_action(effective_poisson(bi), Yfull, Vfull)
    return BFReductionCheck(case, restricted, effective, violation)


def trivial_a_example() -> BialgebroidSpec:
    """Zero A-side over the line, dual side of rank 2 with
    rho~(e^1) = x1 d/dx1, rho~(e^2) = 0 and [e^1, e^2] = e^2."""
    dual = LieAlgebroidSpec.build(1, 2, {(0, 0): "x1"}, {(0, 1, 1): "1"}, name="")
    return BialgebroidSpec(LieAlgebroidSpec.zero(1, 2), dual, name="trivial-A over R")


# ----------------------------------------------------------------------------
# field generation and I/O


def _smooth(rng, shape_lead, nx, ny, d, amplitude, modes=2):
    """Random trigonometric polynomial on the torus, (…, nx, ny, d)."""
    i = np.arange(nx)[:, None] / nx
    j = np.arange(ny)[None, :] / ny
    out = np.zeros(tuple(shape_lead) + (nx, ny, d))
    for kx in range(modes + 1):
        for ky in range(modes + 1):
            coef = rng.normal(size=tuple(shape_lead) + (2, d)) / (1 + kx + ky) ** 2
            phase = 2 * np.pi * (kx * i + ky * j)
            out += coef[..., 0, None, None, :] * np.cos(phase)[..., None] + coef[..., 1, None, None, :] * np.sin(phase)[..., None]
    scale = np.max(np.abs(out), axis=(-3, -2, -1), keepdims=True)
    return amplitude * out / np.where(scale > 0, scale, 1.0)


def random_psm_fields(n: int, nx: int, ny: int, rng, x_scale: float = 0.5, b_max: float = 0.05, v_scale: float = 0.3):
    """Smooth fields on the torus with target T*M: Y (nx, ny, 2n) with
    |Y_b| <= b_max, V (2, nx, ny, 2n) tangent vectors."""
    Yx = _smooth(rng, (), nx, ny, n, x_scale)
    Yb = _smooth(rng, (), nx, ny, n, b_max)
    V = _smooth(rng, (2,), nx, ny, 2 * n, v_scale)
    return np.concatenate([Yx, Yb], axis=-1), V


def random_bf_fields(case: str, n: int, r: int, nx: int, ny: int, N_t: int, rng, with_multipliers: bool = True) -> BFFields:
    """Seeded fields satisfying the delta constraints of ``case``."""
    Adot = rng.normal(size=(N_t, nx, ny, r)) / N_t
    B = np.broadcast_to(rng.normal(size=(2, nx, ny, r)), (N_t + 1, 2, nx, ny, r)).copy()
    A = rng.normal(size=(N_t + 1, 2, nx, ny, r)) if with_multipliers else None
    if A is not None:
        A[0] = A[-1] = 0.0
    if case != "trivial-A":
        return BFFields(Adot, B, A)
    X = np.broadcast_to(rng.uniform(-1, 1, size=(nx, ny, n)), (N_t + 1, nx, ny, n)).copy()
    Pdot = rng.normal(size=(N_t, 2, nx, ny, n)) / N_t
    P = rng.normal(size=(N_t + 1, nx, ny, n)) if with_multipliers else None
    if P is not None:
        P[0] = P[-1] = 0.0
    return BFFields(Adot, B, A, X, Pdot, P)


def export_fields(path, **arrays) -> None:
    """Write named arrays as {"name": {"shape": [...], "data": [...]}}."""
    doc = {}
    for name, arr in arrays.items():
        if arr is None:
            continue
        a = np.asarray(arr, dtype=float)
        doc[name] = {"shape": list(a.shape), "data": [float(v) for v in a.reshape(-1)]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def import_fields(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {}
    for name, entry in doc.items():
        a = np.asarray(entry["data"], dtype=float)
        shape = tuple(entry["shape"])
        if a.size != int(np.prod(shape)):
            raise ValueError(f"array {name!r}: {a.size} values do not fill shape {shape}")
        out[name] = a.reshape(shape)
    return out
