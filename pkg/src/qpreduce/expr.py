"""Scalar formulas in the base coordinates x1..xn.

Formulas are parsed into immutable trees which can be evaluated on plain
floats, on numpy arrays (one entry per sample point) or on dual numbers.
Dual numbers give exact first derivatives; nesting them with distinct tags
gives exact higher derivatives.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "ExprDomainError",
    "Node",
    "Num",
    "Var",
    "Unary",
    "Binary",
    "Pow",
    "Deriv",
    "DualNumber",
    "parse",
    "to_text",
    "evaluate",
    "evaluate_batch",
    "evaluate_many",
    "eval_gradient",
    "gradient_batch",
    "derivative_batch",
    "const",
    "var",
    "variables",
    "derivative",
    "is_zero_literal",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ExprError(ValueError):
    """Base class for formula errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class ExprDomainError(ExprError):
    def __init__(self, message: str, node: "Node"):
        where = f" (node at byte {node.pos})" if node.pos >= 0 else ""
        super().__init__(f"{message} in '{to_text(node)}'{where}")
        self.node = node


# ----------------------------------------------------------------------------
# tree


@dataclass(frozen=True)
class Node:
    pos: int = field(default=-1, compare=False, hash=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    index: int  # zero based


@dataclass(frozen=True)
class Unary(Node):
    op: str  # "neg" or one of FUNCTIONS
    operand: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str  # + - * /
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True)
class Deriv(Node):
    """Partial derivative of ``operand`` by x_{index+1}, written d_x<k>(...)."""

    operand: Node
    index: int


def derivative(node: Node, index: int) -> Deriv:
    return Deriv(node, index)


def variables(node: Node) -> set[int]:
    """Indices of the coordinates a formula mentions."""
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Unary, Deriv)):
        return variables(node.operand)
    if isinstance(node, Pow):
        return variables(node.base)
    return variables(node.left) | variables(node.right)


def is_zero_literal(node: Node) -> bool:
    return isinstance(node, Num) and node.value == 0.0


def const(value: float) -> Num:
    return Num(float(value))


def var(index: int) -> Var:
    return Var(index)


def max_var_index(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return -1
    if isinstance(node, Unary):
        return max_var_index(node.operand)
    if isinstance(node, Pow):
        return max_var_index(node.base)
    if isinstance(node, Deriv):
        return max(node.index, max_var_index(node.operand))
    return max(max_var_index(node.left), max_var_index(node.right))


# ----------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    data = source.encode("utf-8")
    text = source
    tokens = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if m is None or m.end() == i:
            raise ExprSyntaxError(f"unexpected character {text[i]!r}", len(text[:i].encode("utf-8")))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode("utf-8"))))
        i = m.end()
    tokens.append(("end", "", len(data)))
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int):
        self.tokens = _tokenize(source)
        self.i = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = Binary(op, node, self.term(), pos=pos)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = Binary(op, node, self.unary(), pos=pos)
        return node

    def unary(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.unary(), pos=pos)
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            exponent = self.exponent()
            if self.peek()[1] == "^" and self.peek()[0] == "op":
                raise ExprSyntaxError("chained exponent, use parentheses", self.peek()[2])
            return Pow(base, exponent, pos=pos)
        return base

    def exponent(self) -> int:
        kind, text, pos = self.peek()
        paren = kind == "op" and text == "("
        if paren:
            self.take()
        sign = 1
        kind, text, pos = self.peek()
        if kind == "op" and text in "+-":
            self.take()
            sign = -1 if text == "-" else 1
        kind, text, pos = self.take()
        if kind != "num" or not text.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        if paren:
            self.expect(")")
        return sign * int(text)

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text), pos=pos)
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg, pos=pos)
            d = re.fullmatch(r"d_x([1-9][0-9]*)", text)
            if d is not None:
                index = int(d.group(1))
                if index > self.dim:
                    raise ExprError(
                        f"derivative variable x{index} out of range for dimension {self.dim} at byte {pos}"
                    )
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Deriv(arg, index - 1, pos=pos)
            m = re.fullmatch(r"x([1-9][0-9]*)", text)
            if m is None:
                raise ExprError(f"unknown identifier {text!r} at byte {pos}")
            index = int(m.group(1))
            if index > self.dim:
                raise ExprError(
                    f"variable {text} out of range for dimension {self.dim} at byte {pos}"
                )
            return Var(index - 1, pos=pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse(source: str, dim: int) -> Node:
    """Parse ``source`` into a tree over the variables x1..x<dim>."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        return Num(float(source))
    if not isinstance(source, str):
        raise ExprError(f"formula must be text, got {type(source).__name__}")
    return _Parser(source, dim).parse()


# ----------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _num_text(value: float) -> str:
    if value < 0 or math.copysign(1.0, value) < 0:
        return f"(-{_num_text(-value)})" if value != 0 else "0.0"
    if not math.isfinite(value):
        raise ExprError("non-finite literal cannot be printed")
    return repr(float(value))


def to_text(node: Node) -> str:
    """Print a tree so that parsing the result reproduces the tree."""
    return _print(node, 0)


def _print(node: Node, context: int) -> str:
    # context: 0 top, 1 sum, 2 product, 3 unary, 4 power base
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Pow):
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"{_print(node.base, 4)}^{exp}"
    if isinstance(node, Unary):
        if node.op == "neg":
            text = "-" + _print(node.operand, 3)
            return f"({text})" if context >= 4 else text
        return f"{node.op}({_print(node.operand, 0)})"
    if isinstance(node, Deriv):
        return f"d_x{node.index + 1}({_print(node.operand, 0)})"
    prec = _PREC[node.op]
    left = _print(node.left, prec)
    # same precedence on the right needs parentheses (left associativity)
    right = _print(node.right, prec + 1 if prec == 1 else 3)
    text = f"{left} {node.op} {right}"
    return f"({text})" if context > prec else text


# ----------------------------------------------------------------------------
# dual numbers


def _tag(v: Any) -> int:
    return v.tag if isinstance(v, DualNumber) else -1


def _scalar_value(v: Any):
    while isinstance(v, DualNumber):
        v = v.val
    return v


@dataclass(frozen=True)
class DualNumber:
    """Value plus a vector of directional derivatives.

    ``val`` and the entries of ``der`` may be floats, numpy arrays or dual
    numbers with a lower ``tag``; this nesting is what yields higher
    derivatives.  Operands with a lower tag are treated as constants.
    """

    val: Any
    der: tuple
    tag: int = 0

    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def _lift(self, other):
        if isinstance(other, DualNumber) and other.tag == self.tag:
            if len(other.der) != len(self.der):
                raise ValueError("dual numbers with different direction counts")
            return other
        return None

    def __add__(self, other):
        if _tag(other) > self.tag:
            return other.__radd__(self)
        o = self._lift(other)
        if o is None:
            return DualNumber(self.val + other, self.der, self.tag)
        return DualNumber(self.val + o.val, tuple(a + b for a, b in zip(self.der, o.der)), self.tag)

    def __radd__(self, other):
        return DualNumber(other + self.val, self.der, self.tag)

    def __neg__(self):
        return DualNumber(-self.val, tuple(-d for d in self.der), self.tag)

    def __sub__(self, other):
        if _tag(other) > self.tag:
            return (-other).__radd__(self)
        return self + (-other)

    def __rsub__(self, other):
        return (-self).__radd__(other)

    def __mul__(self, other):
        if _tag(other) > self.tag:
            return other.__rmul__(self)
        o = self._lift(other)
        if o is None:
            return DualNumber(self.val * other, tuple(d * other for d in self.der), self.tag)
        return DualNumber(
            self.val * o.val,
            tuple(a * o.val + self.val * b for a, b in zip(self.der, o.der)),
            self.tag,
        )

    def __rmul__(self, other):
        return DualNumber(other * self.val, tuple(other * d for d in self.der), self.tag)

    def reciprocal(self):
        inv = 1.0 / self.val
        scale = -(inv * inv)
        return DualNumber(inv, tuple(scale * d for d in self.der), self.tag)

    def __truediv__(self, other):
        if _tag(other) > self.tag:
            return other.reciprocal().__rmul__(self)
        o = self._lift(other)
        if o is None:
            return DualNumber(self.val / other, tuple(d / other for d in self.der), self.tag)
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal().__rmul__(other)

    def __pow__(self, exponent: int):
        return _ipow(self, exponent)


def _ipow(v, exponent: int):
    if exponent == 0:
        return 1.0 + 0.0 * v if not isinstance(v, DualNumber) else DualNumber(
            1.0 + 0.0 * _scalar_value(v), tuple(0.0 * d for d in v.der), v.tag
        )
    if exponent < 0:
        return 1.0 / _ipow(v, -exponent)
    result = v
    for _ in range(exponent - 1):
        result = result * v
    return result


def _apply(fn: str, v):
    if isinstance(v, DualNumber):
        if fn == "sin":
            return DualNumber(_apply("sin", v.val), tuple(_apply("cos", v.val) * d for d in v.der), v.tag)
        if fn == "cos":
            s = -_apply("sin", v.val)
            return DualNumber(_apply("cos", v.val), tuple(s * d for d in v.der), v.tag)
        if fn == "exp":
            e = _apply("exp", v.val)
            return DualNumber(e, tuple(e * d for d in v.der), v.tag)
        if fn == "sqrt":
            r = _apply("sqrt", v.val)
            half = 0.5 / r
            return DualNumber(r, tuple(half * d for d in v.der), v.tag)
        raise ExprError(f"unknown function {fn}")
    return getattr(np, fn)(v)


# ----------------------------------------------------------------------------
# evaluation


def _is_zero(v) -> bool:
    base = _scalar_value(v)
    return bool(np.any(np.asarray(base) == 0.0))


def _is_negative(v, strict: bool) -> bool:
    base = np.asarray(_scalar_value(v))
    return bool(np.any(base < 0.0)) if strict else bool(np.any(base <= 0.0))


def _eval(node: Node, env: Sequence[Any]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.index]
    if isinstance(node, Binary):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if _is_zero(right):
            raise ExprDomainError("division by zero", node)
        return left / right
    if isinstance(node, Pow):
        base = _eval(node.base, env)
        if node.exponent < 0 and _is_zero(base):
            raise ExprDomainError("negative power of zero", node)
        if node.exponent == 0:
            return 1.0 + 0.0 * base
        return _ipow(base, node.exponent)
    if isinstance(node, Unary):
        arg = _eval(node.operand, env)
        if node.op == "neg":
            return -arg
        if node.op == "sqrt":
            differentiated = isinstance(arg, DualNumber)
            if _is_negative(arg, strict=not differentiated):
                what = "sqrt of negative" if _is_negative(arg, True) else "sqrt not differentiable at 0"
                raise ExprDomainError(what, node)
        return _apply(node.op, arg)
    if isinstance(node, Deriv):
        # one more dual level above everything already in the environment
        level = 1 + max((_tag(v) for v in env), default=-1)
        k = node.index
        inner = [DualNumber(v, (1.0 if j == k else 0.0,), level) for j, v in enumerate(env)]
        out = _eval(node.operand, inner)
        if isinstance(out, DualNumber) and out.tag == level:
            return out.der[0]
        return 0.0 * _scalar_value(env[0]) if env else 0.0
    raise ExprError(f"unknown node {node!r}")


def _check_point(x, dim: int | None):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if dim is not None and arr.shape[-1] != dim:
        raise ExprError(f"point has dimension {arr.shape[-1]}, expected {dim}")
    return arr


def evaluate(node: Node, x, dim: int | None = None) -> float:
    """Value of ``node`` at the single point ``x``."""
    arr = _check_point(x, dim)
    if max_var_index(node) >= arr.shape[-1]:
        raise ExprError("point has fewer coordinates than the formula uses")
    env = [float(v) for v in arr]
    return float(_eval(node, env))


def evaluate_batch(node: Node, points) -> np.ndarray:
    """Values at each row of ``points`` (shape (m, n))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    env = [pts[:, k] for k in range(pts.shape[1])]
    value = _eval(node, env)
    return np.broadcast_to(np.asarray(value, dtype=float), (pts.shape[0],)).copy()


def evaluate_many(nodes: Sequence[Node], points) -> np.ndarray:
    """Values of several formulas at each row of ``points``: shape (m, len(nodes))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    env = [pts[:, k] for k in range(pts.shape[1])]
    out = np.empty((pts.shape[0], len(nodes)))
    for j, node in enumerate(nodes):
        out[:, j] = _eval(node, env)
    return out


def eval_gradient(node: Node, x, dim: int | None = None) -> tuple[float, np.ndarray]:
    """Value and gradient at ``x`` by forward-mode dual numbers."""
    arr = _check_point(x, dim)
    n = arr.shape[-1]
    if max_var_index(node) >= n:
        raise ExprError("point has fewer coordinates than the formula uses")
    env = [
        DualNumber(float(arr[k]), tuple(1.0 if j == k else 0.0 for j in range(n)))
        for k in range(n)
    ]
    out = _eval(node, env)
    if not isinstance(out, DualNumber):
        return float(out), np.zeros(n)
    return float(out.val), np.array([float(d) for d in out.der])


def gradient_batch(node: Node, points) -> tuple[np.ndarray, np.ndarray]:
    """Values (m,) and gradients (m, n) at each row of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = pts.shape
    zero = np.zeros(m)
    one = np.ones(m)
    env = [
        DualNumber(pts[:, k], tuple(one if j == k else zero for j in range(n)))
        for k in range(n)
    ]
    out = _eval(node, env)
    if not isinstance(out, DualNumber):
        return np.broadcast_to(np.asarray(out, float), (m,)).copy(), np.zeros((m, n))
    value = np.broadcast_to(np.asarray(out.val, float), (m,)).copy()
    grad = np.stack([np.broadcast_to(np.asarray(d, float), (m,)) for d in out.der], axis=1)
    return value, grad


def derivative_batch(node: Node, points, directions: Sequence[int]) -> np.ndarray:
    """Mixed partial derivative along ``directions`` (zero-based variable
    indices, repeats allowed) at each row of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = pts.shape
    if not directions:
        return evaluate_batch(node, pts)
    env = []
    for k in range(n):
        v: Any = pts[:, k]
        for level, d in enumerate(directions, start=1):
            v = DualNumber(v, (1.0 if d == k else 0.0,), level)
        env.append(v)
    out = _eval(node, env)
    for level in range(len(directions), 0, -1):
        if isinstance(out, DualNumber) and out.tag == level:
            out = out.der[0]
        else:
            out = 0.0
    return np.broadcast_to(np.asarray(_scalar_value(out), float), (m,)).copy()
