"""Lie algebroids, Lie bialgebroids and Poisson structures on a single chart.

Structure functions are formulas in the base coordinates.  Conventions:

* anchor ``rho^i_alpha`` is stored under key ``(i, alpha)``;
* bracket ``c^gamma_{alpha beta}`` (``[e_alpha, e_beta] = c^gamma e_gamma``) is
  stored under ``(alpha, beta, gamma)`` with ``alpha < beta`` only;
* a dual side is itself a Lie algebroid on A*, so ``rho~^{alpha i}`` lives
  under ``(i, alpha)`` and ``c~^{alpha beta}_gamma`` under
  ``(alpha, beta, gamma)``.

A Lie algebra is a Lie algebroid over a one-point base, modelled as base
dimension 1 with constant coefficients and zero anchor.

The residuals here are computed directly from the structure functions and
their dual-number gradients, independently of the graded engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Mapping

import numpy as np

from . import expr as ex
from . import graded as gr

__all__ = [
    "LieAlgebroidSpec",
    "BialgebroidSpec",
    "PoissonSpec",
    "AlgebroidResiduals",
    "BialgebroidReport",
    "algebroid_axiom_residuals",
    "cross_oracle_gap",
    "bialgebroid_residuals",
    "poisson_to_bialgebroid",
    "builtin",
    "CATALOGUE",
    "LIE_ALGEBRAS",
    "lie_algebra",
    "lie_bialgebra",
    "with_proto",
    "CME_ANCHOR_FACTOR",
    "CME_JACOBI_FACTOR",
]


def _as_node(value, n: int) -> ex.Node:
    if isinstance(value, ex.Node):
        return value
    if isinstance(value, str):
        return ex.parse(value, n)
    return ex.const(float(value))


def _check_points(points, n: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != n:
        raise ValueError(f"sample points have dimension {pts.shape[1]}, expected {n}")
    return pts


def _value_and_grad(node: ex.Node, pts: np.ndarray, cache: dict):
    if node not in cache:
        cache[node] = ex.gradient_batch(node, pts)
    return cache[node]


# ----------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class LieAlgebroidSpec:
    n: int
    r: int
    anchor: Mapping[tuple[int, int], ex.Node] = field(default_factory=dict)
    bracket: Mapping[tuple[int, int, int], ex.Node] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.r < 1:
            raise ValueError("base dimension and rank must be positive")
        for (i, alpha), node in self.anchor.items():
            if not (0 <= i < self.n and 0 <= alpha < self.r):
                raise ValueError(f"anchor index {(i + 1, alpha + 1)} out of range")
            self._check_node(node, "anchor")
        for (alpha, beta, gamma), node in self.bracket.items():
            if not (0 <= alpha < beta < self.r and 0 <= gamma < self.r):
                raise ValueError(
                    f"bracket key {(alpha + 1, beta + 1, gamma + 1)} must satisfy alpha < beta <= rank"
                )
            self._check_node(node, "bracket")

    def _check_node(self, node, what: str):
        if not isinstance(node, ex.Node):
            raise TypeError(f"{what} entries must be parsed formulas")
        if ex.max_var_index(node) >= self.n:
            raise ValueError(f"{what} formula {ex.to_text(node)!r} uses a variable beyond x{self.n}")

    @classmethod
    def build(cls, n: int, r: int, anchor=None, bracket=None, name: str = "") -> "LieAlgebroidSpec":
        """Build from ``{(i, alpha): value}`` and ``{(alpha, beta, gamma): value}``
        (zero based).  Values may be formulas, text or numbers; bracket keys
        with ``alpha > beta`` are folded in by antisymmetry."""
        anc = {}
        for (i, alpha), value in (anchor or {}).items():
            node = _as_node(value, n)
            if not ex.is_zero_literal(node):
                anc[(i, alpha)] = node
        br: dict = {}
        for (alpha, beta, gamma), value in (bracket or {}).items():
            if alpha == beta:
                raise ValueError("bracket structure functions are antisymmetric; alpha == beta given")
            node = _as_node(value, n)
            key = (min(alpha, beta), max(alpha, beta), gamma)
            if key in br:
                raise ValueError(f"bracket entry {tuple(k + 1 for k in key)} given twice")
            if alpha > beta:
                node = ex.Unary("neg", node)
            if not ex.is_zero_literal(node):
                br[key] = node
        return cls(n, r, anc, br, name)

    @classmethod
    def zero(cls, n: int, r: int, name: str = "") -> "LieAlgebroidSpec":
        return cls(n, r, {}, {}, name)

    def is_zero(self) -> bool:
        return not self.anchor and not self.bracket

    def bracket_node(self, alpha: int, beta: int, gamma: int) -> ex.Node | None:
        if alpha == beta:
            return None
        if alpha < beta:
            return self.bracket.get((alpha, beta, gamma))
        node = self.bracket.get((beta, alpha, gamma))
        return None if node is None else ex.Unary("neg", node)

    def perturbed(self, kind: str, key: tuple, eps: float) -> "LieAlgebroidSpec":
        """Copy with ``eps`` added to one anchor or bracket entry."""
        table = dict(self.anchor if kind == "anchor" else self.bracket)
        old = table.get(key, ex.const(0.0))
        table[key] = ex.Binary("+", old, ex.const(eps))
        if kind == "anchor":
            return replace(self, anchor=table)
        if key[0] >= key[1]:
            raise ValueError("perturb bracket entries by their stored key alpha < beta")
        return replace(self, bracket=table)

    # numeric tables ------------------------------------------------------------
    def anchor_values(self, points) -> np.ndarray:
        """rho[m, i, alpha] without derivatives."""
        pts = _check_points(points, self.n)
        rho = np.zeros((pts.shape[0], self.n, self.r))
        if self.anchor:
            keys = list(self.anchor)
            vals = ex.evaluate_many([self.anchor[k] for k in keys], pts)
            for j, (i, alpha) in enumerate(keys):
                rho[:, i, alpha] = vals[:, j]
        return rho

    def bracket_values(self, points) -> np.ndarray:
        """c[m, alpha, beta, gamma] = c^gamma_{alpha beta} without derivatives."""
        pts = _check_points(points, self.n)
        c = np.zeros((pts.shape[0], self.r, self.r, self.r))
        if self.bracket:
            keys = list(self.bracket)
            vals = ex.evaluate_many([self.bracket[k] for k in keys], pts)
            for j, (alpha, beta, gamma) in enumerate(keys):
                c[:, alpha, beta, gamma] = vals[:, j]
                c[:, beta, alpha, gamma] = -vals[:, j]
        return c

    def anchor_arrays(self, points, cache: dict | None = None):
        """rho[m, i, alpha] and its gradient drho[m, i, alpha, j] = d_j rho^i_alpha."""
        pts = _check_points(points, self.n)
        cache = {} if cache is None else cache
        m = pts.shape[0]
        rho = np.zeros((m, self.n, self.r))
        drho = np.zeros((m, self.n, self.r, self.n))
        for (i, alpha), node in self.anchor.items():
            v, g = _value_and_grad(node, pts, cache)
            rho[:, i, alpha] = v
            drho[:, i, alpha, :] = g
        return rho, drho

    def bracket_arrays(self, points, cache: dict | None = None):
        """c[m, alpha, beta, gamma] (full antisymmetric) and dc[..., j]."""
        pts = _check_points(points, self.n)
        cache = {} if cache is None else cache
        m = pts.shape[0]
        c = np.zeros((m, self.r, self.r, self.r))
        dc = np.zeros((m, self.r, self.r, self.r, self.n))
        for (alpha, beta, gamma), node in self.bracket.items():
            v, g = _value_and_grad(node, pts, cache)
            c[:, alpha, beta, gamma] = v
            c[:, beta, alpha, gamma] = -v
            dc[:, alpha, beta, gamma, :] = g
            dc[:, beta, alpha, gamma, :] = -g
        return c, dc

    def describe(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "anchor": [[i + 1, a + 1, ex.to_text(v)] for (i, a), v in sorted(self.anchor.items())],
            "bracket": [
                [a + 1, b + 1, g + 1, ex.to_text(v)] for (a, b, g), v in sorted(self.bracket.items())
            ],
        }


def _antisymmetric3(table, n: int, r: int) -> dict:
    out = {}
    for key, value in (table or {}).items():
        if len(set(key)) != 3:
            raise ValueError("proto terms are totally antisymmetric; repeated index given")
        order = sorted(range(3), key=lambda k: key[k])
        # parity of the sorting permutation
        inv = sum(1 for x, y in combinations(order, 2) if x > y)
        node = _as_node(value, n)
        if inv % 2:
            node = ex.Unary("neg", node)
        skey = tuple(sorted(key))
        if max(skey) >= r:
            raise ValueError(f"proto index {tuple(k + 1 for k in key)} out of range")
        if skey in out:
            raise ValueError(f"proto entry {tuple(k + 1 for k in skey)} given twice")
        if not ex.is_zero_literal(node):
            out[skey] = node
    return out


@dataclass(frozen=True)
class BialgebroidSpec:
    """A pair of Lie algebroid structures on A (``primal``) and A* (``dual``),
    with optional totally antisymmetric proto terms ``h`` (on a a a) and
    ``h_dual`` (on b b b), stored for sorted index triples."""

    primal: LieAlgebroidSpec
    dual: LieAlgebroidSpec
    h: Mapping[tuple[int, int, int], ex.Node] = field(default_factory=dict)
    h_dual: Mapping[tuple[int, int, int], ex.Node] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if (self.primal.n, self.primal.r) != (self.dual.n, self.dual.r):
            raise ValueError("A and A* sides must share base dimension and rank")
        for table in (self.h, self.h_dual):
            for key in table:
                if not (0 <= key[0] < key[1] < key[2] < self.r):
                    raise ValueError("proto terms are stored for strictly increasing index triples")

    @property
    def n(self) -> int:
        return self.primal.n

    @property
    def r(self) -> int:
        return self.primal.r

    @property
    def is_proto(self) -> bool:
        return bool(self.h) or bool(self.h_dual)

    @classmethod
    def from_algebroid(cls, spec: LieAlgebroidSpec, name: str = "") -> "BialgebroidSpec":
        return cls(spec, LieAlgebroidSpec.zero(spec.n, spec.r), name=name or spec.name)

    def flip(self) -> "BialgebroidSpec":
        """Exchange the roles of A and A*."""
        return BialgebroidSpec(self.dual, self.primal, self.h_dual, self.h, self.name)

    def describe(self) -> dict:
        out = {"primal": self.primal.describe(), "dual": self.dual.describe()}
        if self.is_proto:
            out["h"] = [[*(k + 1 for k in key), ex.to_text(v)] for key, v in sorted(self.h.items())]
            out["h_dual"] = [[*(k + 1 for k in key), ex.to_text(v)] for key, v in sorted(self.h_dual.items())]
        return out


def with_proto(spec: BialgebroidSpec, h=None, h_dual=None) -> BialgebroidSpec:
    """Attach proto terms given as ``{(alpha, beta, gamma): value}``."""
    return replace(
        spec,
        h=_antisymmetric3(h, spec.n, spec.r),
        h_dual=_antisymmetric3(h_dual, spec.n, spec.r),
    )


@dataclass(frozen=True)
class PoissonSpec:
    n: int
    pi: Mapping[tuple[int, int], ex.Node] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        for (i, j), node in self.pi.items():
            if not 0 <= i < j < self.n:
                raise ValueError(f"pi key {(i + 1, j + 1)} must satisfy i < j <= {self.n}")
            if ex.max_var_index(node) >= self.n:
                raise ValueError(f"pi formula {ex.to_text(node)!r} uses a variable beyond x{self.n}")

    @classmethod
    def build(cls, n: int, entries, name: str = "") -> "PoissonSpec":
        """``entries`` maps zero-based ``(i, j)`` (any order, i != j) to values."""
        out: dict = {}
        for (i, j), value in dict(entries).items():
            if i == j:
                raise ValueError("pi is antisymmetric; diagonal entry given")
            node = _as_node(value, n)
            if i > j:
                i, j, node = j, i, ex.Unary("neg", node)
            if (i, j) in out:
                raise ValueError(f"pi entry {(i + 1, j + 1)} given twice")
            if not ex.is_zero_literal(node):
                out[(i, j)] = node
        return cls(n, out, name)

    def matrix(self, points) -> np.ndarray:
        """pi[m, i, j] without derivatives."""
        pts = _check_points(points, self.n)
        P = np.zeros((pts.shape[0], self.n, self.n))
        if self.pi:
            keys = list(self.pi)
            vals = ex.evaluate_many([self.pi[k] for k in keys], pts)
            for col, (i, j) in enumerate(keys):
                P[:, i, j], P[:, j, i] = vals[:, col], -vals[:, col]
        return P

    def arrays(self, points, cache: dict | None = None):
        """pi[m, i, j] and dpi[m, i, j, k] = d_k pi^{ij}."""
        pts = _check_points(points, self.n)
        cache = {} if cache is None else cache
        m = pts.shape[0]
        P = np.zeros((m, self.n, self.n))
        dP = np.zeros((m, self.n, self.n, self.n))
        for (i, j), node in self.pi.items():
            v, g = _value_and_grad(node, pts, cache)
            P[:, i, j], P[:, j, i] = v, -v
            dP[:, i, j, :], dP[:, j, i, :] = g, -g
        return P, dP

    def jacobi_residual(self, points) -> np.ndarray:
        """sum over cyclic (i, j, k) of pi^{il} d_l pi^{jk}, shape (m, n, n, n)."""
        P, dP = self.arrays(points)
        t = np.einsum("mil,mjkl->mijk", P, dP)
        return t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)

    def describe(self) -> dict:
        return {"dim": self.n, "pi": [[i + 1, j + 1, ex.to_text(v)] for (i, j), v in sorted(self.pi.items())]}


# ----------------------------------------------------------------------------
# direct residuals
#
# For a Lie algebroid theta = rho a p + 1/2 c a a b the bracket {theta, theta}
# contains exactly two kinds of monomials.  With the bracket convention of the
# graded engine their coefficients are fixed multiples of the residuals below;
# the factors were read off once by expanding {theta, theta} and are frozen.

CME_ANCHOR_FACTOR = -2  # coefficient of a^alpha a^beta p_i  (alpha < beta)
CME_JACOBI_FACTOR = -2  # coefficient of a^alpha a^beta a^gamma b_delta (alpha<beta<gamma)


@dataclass
class AlgebroidResiduals:
    """``anchor[m, alpha, beta, i]`` and ``jacobi[m, alpha, beta, gamma, delta]``."""

    anchor: np.ndarray
    jacobi: np.ndarray

    @property
    def max_anchor(self) -> float:
        return float(np.max(np.abs(self.anchor), initial=0.0))

    @property
    def max_jacobi(self) -> float:
        return float(np.max(np.abs(self.jacobi), initial=0.0))

    @property
    def max_residual(self) -> float:
        return max(self.max_anchor, self.max_jacobi)


def algebroid_axiom_residuals(spec: LieAlgebroidSpec, sample_points) -> AlgebroidResiduals:
    """Anchor compatibility and Jacobi residuals at each sample point.

    anchor^i_{ab} = rho^j_a d_j rho^i_b - rho^j_b d_j rho^i_a - rho^i_g c^g_{ab}
    jacobi^d_{abg} = cyclic_{abg}(rho^j_a d_j c^d_{bg} + c^d_{ae} c^e_{bg})
    """
    pts = _check_points(sample_points, spec.n)
    cache: dict = {}
    rho, drho = spec.anchor_arrays(pts, cache)
    c, dc = spec.bracket_arrays(pts, cache)
    # t[m, a, b, i] = rho^j_a d_j rho^i_b
    t = np.einsum("mja,mibj->mabi", rho, drho)
    anchor = t - t.transpose(0, 2, 1, 3) - np.einsum("mig,mabg->mabi", rho, c)
    # u[m, a, b, g, d] = rho^j_a d_j c^d_{bg} + c^d_{ae} c^e_{bg}
    u = np.einsum("mja,mbgdj->mabgd", rho, dc) + np.einsum("maed,mbge->mabgd", c, c)
    jacobi = u + u.transpose(0, 2, 3, 1, 4) + u.transpose(0, 3, 1, 2, 4)
    return AlgebroidResiduals(anchor, jacobi)


@dataclass
class BialgebroidReport:
    """{theta, theta} split by the weight (#a - #b) of its monomials."""

    groups: dict[str, gr.CoefficientReport]
    proto: bool
    note: str = ""

    @property
    def max_residual(self) -> float:
        return max((g.max_residual for g in self.groups.values()), default=0.0)

    def maxima(self) -> dict[str, float]:
        return {k: g.max_residual for k, g in self.groups.items()}

    def failing(self, tolerance: float) -> list[str]:
        return [k for k, g in self.groups.items() if g.max_residual > tolerance]


WEIGHT_NAMES = {2: "[Q,Q]", 0: "[Q,pi]", -2: "[pi,pi]"}


def _weight(poly: gr.GradedPolynomial, key: tuple) -> int:
    w = 0
    for code in key:
        kind = poly.kind(code)[0]
        w += 1 if kind == "a" else -1 if kind == "b" else 0
    return w


def cross_oracle_gap(spec: LieAlgebroidSpec, sample_points) -> float:
    """Max pointwise gap between the {theta, theta} coefficients and the
    direct residuals scaled by the frozen factors."""
    pts = _check_points(sample_points, spec.n)
    square = gr.canonical_bracket(gr.theta_from_spec(spec), gr.theta_from_spec(spec))
    res = algebroid_axiom_residuals(spec, pts)
    cache: dict = {}
    gap = 0.0
    r = spec.r
    for a in range(r):
        for b in range(a + 1, r):
            for i in range(spec.n):
                c = square.coefficient([("a", a), ("a", b), ("p", i)]).evaluate(pts, cache)
                gap = max(gap, float(np.max(np.abs(c - CME_ANCHOR_FACTOR * res.anchor[:, a, b, i]))))
            for g in range(b + 1, r):
                for d in range(r):
                    c = square.coefficient([("a", a), ("a", b), ("a", g), ("b", d)]).evaluate(pts, cache)
                    gap = max(gap, float(np.max(np.abs(c - CME_JACOBI_FACTOR * res.jacobi[:, a, b, g, d]))))
    return gap


def bialgebroid_residuals(spec: BialgebroidSpec, sample_points) -> BialgebroidReport:
    """The three compatibility conditions read off {theta, theta}.

    Q_A carries weight +1, pi_A weight -1 and the bracket preserves weight,
    so the weight 2, 0, -2 parts of {theta, theta} are [Q,Q], 2[Q,pi] and
    [pi,pi].  With proto terms the weights 4, -4, 6, -6 also appear and the
    groups are reported under their weights.
    """
    pts = _check_points(sample_points, spec.n)
    theta = gr.theta_from_spec(spec)
    square = gr.canonical_bracket(theta, theta)
    by_weight: dict[int, dict] = {w: {} for w in WEIGHT_NAMES}
    for key, coeff in square.terms.items():
        by_weight.setdefault(_weight(square, key), {})[key] = coeff
    groups = {}
    for w in sorted(by_weight, reverse=True):
        name = WEIGHT_NAMES.get(w, f"weight {w}")
        poly = gr.GradedPolynomial(spec.n, spec.r, by_weight[w])
        groups[name] = gr.CoefficientReport.from_polynomial(poly, pts)
    note = ""
    if spec.is_proto:
        note = "spec carries proto terms; groups include h and h_dual contributions"
    return BialgebroidReport(groups, spec.is_proto, note)


# ----------------------------------------------------------------------------
# Poisson manifolds


def poisson_to_bialgebroid(p: PoissonSpec) -> BialgebroidSpec:
    """Cotangent algebroid of (M, pi) paired with the tangent bundle.

    On the frame dx^1..dx^n: rho^i_a = pi^{a i}, and the Koszul bracket
    [dx^a, dx^b]_pi = d pi^{ab} gives c^g_{ab} = d_g pi^{ab}.  The dual side
    is TM with identity anchor and zero bracket.
    """
    n = p.n
    anchor: dict = {}
    bracket: dict = {}
    for (a, b), node in p.pi.items():
        # rho^b_a = pi^{ab}, rho^a_b = pi^{ba} = -pi^{ab}
        anchor[(b, a)] = node
        anchor[(a, b)] = ex.Unary("neg", node)
        for g in sorted(ex.variables(node)):
            bracket[(a, b, g)] = ex.derivative(node, g)
    primal = LieAlgebroidSpec(n, n, anchor, bracket, name=f"cotangent({p.name})" if p.name else "")
    dual = LieAlgebroidSpec(n, n, {(i, i): ex.const(1.0) for i in range(n)}, {}, name="tangent")
    return BialgebroidSpec(primal, dual, name=primal.name)


# ----------------------------------------------------------------------------
# catalogue

LIE_ALGEBRAS: dict[str, tuple[int, dict]] = {
    # [e1,e2] = e3, [e2,e3] = e1, [e3,e1] = e2
    "so3": (3, {(0, 1, 2): 1.0, (1, 2, 0): 1.0, (0, 2, 1): -1.0}),
    # [e1,e2] = e2
    "aff1": (2, {(0, 1, 1): 1.0}),
}


def _lie_constants(name: str) -> tuple[int, dict]:
    if name.startswith("abelian:"):
        try:
            r = int(name.split(":", 1)[1])
        except ValueError:
            raise KeyError(f"bad abelian rank in {name!r}") from None
        if r < 1:
            raise KeyError(f"bad abelian rank in {name!r}")
        return r, {}
    if name not in LIE_ALGEBRAS:
        raise KeyError(f"unknown Lie algebra {name!r}")
    return LIE_ALGEBRAS[name]


def lie_algebra(name: str) -> LieAlgebroidSpec:
    """A Lie algebra as an algebroid over a one-point base (n = 1)."""
    r, consts = _lie_constants(name)
    return LieAlgebroidSpec.build(1, r, {}, consts, name=name)


def lie_bialgebra(lie: str, cobracket: str, scale: float = 1.0) -> BialgebroidSpec:
    """Lie algebra ``lie`` with dual bracket ``scale`` times the constants of
    ``cobracket`` (same dimension)."""
    primal = lie_algebra(lie)
    r, consts = _lie_constants(cobracket)
    if r != primal.r:
        raise ValueError("Lie algebra and cobracket dimensions differ")
    dual = LieAlgebroidSpec.build(1, r, {}, {k: scale * v for k, v in consts.items()})
    return BialgebroidSpec(primal, dual, name=f"{lie}+{scale}*{cobracket}")


def _tangent(n: int) -> LieAlgebroidSpec:
    return LieAlgebroidSpec.build(n, n, {(i, i): 1.0 for i in range(n)}, {}, name=f"tangent:R^{n}")


def _poisson(name: str) -> PoissonSpec:
    if name == "poisson:constant2d":
        return PoissonSpec.build(2, {(0, 1): 1.0}, name)
    if name == "poisson:so3star":
        return PoissonSpec.build(3, {(0, 1): "x3", (1, 2): "x1", (2, 0): "x2"}, name)
    if name == "poisson:x1-rotation":
        return PoissonSpec.build(2, {(0, 1): "x1"}, name)
    raise KeyError(f"unknown Poisson structure {name!r}")


CATALOGUE = (
    "so3",
    "aff1",
    "tangent:R^1",
    "tangent:R^2",
    "tangent:R^3",
    "poisson:constant2d",
    "poisson:so3star",
    "poisson:x1-rotation",
    "coalgebra:so3",
)


def builtin(name: str) -> BialgebroidSpec | PoissonSpec:
    """Named example structure.

    ``so3``, ``aff1``, ``abelian:<r>`` (Lie algebras with zero dual side),
    ``tangent:R^<n>``, ``poisson:constant2d``, ``poisson:so3star``,
    ``poisson:x1-rotation`` (Poisson specs) and ``coalgebra:<lie>`` (zero
    A-side, dual bracket given by the Lie algebra constants).
    """
    if name.startswith("poisson:"):
        return _poisson(name)
    if name.startswith("tangent:R^"):
        try:
            n = int(name[len("tangent:R^"):])
        except ValueError:
            raise KeyError(f"unknown builtin {name!r}") from None
        if n < 1:
            raise KeyError(f"unknown builtin {name!r}")
        return BialgebroidSpec.from_algebroid(_tangent(n))
    if name.startswith("coalgebra:"):
        lie = lie_algebra(name.split(":", 1)[1])
        return BialgebroidSpec(LieAlgebroidSpec.zero(1, lie.r), replace(lie, name=""), name=name)
    if name in LIE_ALGEBRAS or name.startswith("abelian:"):
        return BialgebroidSpec.from_algebroid(lie_algebra(name))
    raise KeyError(f"unknown builtin {name!r}")


def as_bialgebroid(spec) -> BialgebroidSpec:
    if isinstance(spec, PoissonSpec):
        return poisson_to_bialgebroid(spec)
    if isinstance(spec, LieAlgebroidSpec):
        return BialgebroidSpec.from_algebroid(spec)
    return spec
