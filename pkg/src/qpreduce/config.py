"""JSON configuration for the command-line tool.

A configuration file has two top-level keys::

    {
      "structure": {...},        # required
      "params": {...}            # optional, defaults below
    }

Structure forms (indices are 1-based, formulas are expression strings):

* ``{"builtin": "so3"}``, optionally with ``"h"`` / ``"h_dual"`` lists of
  ``[alpha, beta, gamma, "value"]`` proto terms;
* ``{"poisson": {"dim": 3, "pi": [[1, 2, "x3"], ...]}}``;
* ``{"algebroid": {"dim": n, "rank": r, "anchor": [[i, alpha, "f"]],
  "bracket": [[alpha, beta, gamma, "f"]]}}``;
* ``{"bialgebroid": {... as algebroid ..., "dual_anchor": [...],
  "dual_bracket": [...], "h": [...], "h_dual": [...]}}``.

Any structure may carry ``"perturb": [{"side": "primal", "kind": "bracket",
"key": [1, 2, 3], "eps": 0.001}, ...]`` to add a constant to one entry.
"""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields

from . import expr as ex
from .structures import BialgebroidSpec, LieAlgebroidSpec, PoissonSpec, builtin, poisson_to_bialgebroid, with_proto

__all__ = ["ConfigError", "Tolerances", "Torus", "Exports", "PathDriver", "Params", "ToolConfig", "load_config", "parse_config", "structure_config", "DEFAULTS", "config_schema", "time_formula"]


class ConfigError(ValueError):
    """Schema violation; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


@dataclass
class Tolerances:
    identity: float = 1e-8  # exact identities evaluated in floating point
    flow: float = 1e-6  # anything limited by ODE or quadrature error
    algebraic: float = 1e-12  # lattice identities with no discretization error
    closedness: float = 1e-4  # finite-difference d(omega_Z)
    constraint: float = 1e-4  # O(h^2) constraint residuals of integrated paths


@dataclass
class Torus:
    nx: int = 8
    ny: int = 8


@dataclass
class Exports:
    path_csv: str | None = None
    omega_json: str | None = None
    fields_json: str | None = None


@dataclass
class PathDriver:
    """Driving curves as formulas in ``t`` (one per component)."""

    x0: list | None = None
    b0: list | None = None
    a: list | None = None
    p: list | None = None


@dataclass
class Params:
    samples: int = 100
    seed: int = 0
    box: float = 1.0  # base points are drawn from [-box, box]^n
    b_max: float = 0.1  # fibre coordinates from [-b_max, b_max]^n
    N: int = 500
    N_t: int = 200
    Q: int = 16
    substeps: int = 1
    flow_box: float = 10.0
    triples: int = 20
    times: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    torus: Torus = field(default_factory=Torus)
    tolerances: Tolerances = field(default_factory=Tolerances)
    export: Exports = field(default_factory=Exports)
    path: PathDriver = field(default_factory=PathDriver)


DEFAULTS = asdict(Params())


@dataclass
class ToolConfig:
    structure: object  # BialgebroidSpec or PoissonSpec
    structure_source: dict
    params: Params

    def echo(self) -> dict:
        return {"structure": self.structure_source, "params": asdict(self.params)}


# ----------------------------------------------------------------------------
# params


_NESTED = {"torus": Torus, "tolerances": Tolerances, "export": Exports, "path": PathDriver}


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        raise AssertionError
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    return value


def _fill(cls, raw, prefix: str):
    if not isinstance(raw, dict):
        raise ConfigError(prefix, "expected an object")
    obj = cls()
    names = {f.name for f in fields(cls)}
    for key, value in raw.items():
        full = f"{prefix}.{key}"
        if key not in names:
            raise ConfigError(full, "unknown key")
        if key in _NESTED:
            setattr(obj, key, _fill(_NESTED[key], value, full))
            continue
        default = getattr(obj, key)
        if default is None:
            if value is not None and not isinstance(value, (str, list)):
                raise ConfigError(full, "expected a string or list")
            setattr(obj, key, value)
        elif isinstance(default, list):
            if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
                raise ConfigError(full, "expected a list of numbers")
            setattr(obj, key, [float(v) for v in value])
        else:
            setattr(obj, key, _coerce(full, value, default))
    return obj


def _validate_params(p: Params):
    for key in ("samples", "N", "N_t", "Q", "substeps", "triples"):
        if getattr(p, key) < 1:
            raise ConfigError(f"params.{key}", "must be positive")
    if p.N < 2 or p.N_t < 2:
        raise ConfigError("params.N", "N and N_t must be at least 2")
    if p.torus.nx < 2 or p.torus.ny < 2:
        raise ConfigError("params.torus", "the torus needs at least 2 vertices per direction")
    for name, value in asdict(p.tolerances).items():
        if not value >= 0:
            raise ConfigError(f"params.tolerances.{name}", "must be non-negative")
    for t in p.times:
        if not 0 <= t <= 1:
            raise ConfigError("params.times", "times must lie in [0, 1]")


_T = re.compile(r"\bt\b")


def time_formula(text) -> ex.Node:
    """Parse a formula in the time variable ``t`` (stored as x1)."""
    return ex.parse(_T.sub("x1", str(text)), 1)


def _validate_path(d: PathDriver, n: int, r: int):
    for name, width in (("x0", n), ("b0", r), ("a", r), ("p", n)):
        value = getattr(d, name)
        if value is None:
            continue
        key = f"params.path.{name}"
        if not isinstance(value, list) or len(value) != width:
            raise ConfigError(key, f"expected a list of {width} entries")
        for item in value:
            if name in ("x0", "b0"):
                if isinstance(item, bool) or not isinstance(item, (int, float)):
                    raise ConfigError(key, f"expected numbers, got {item!r}")
                continue
            try:
                time_formula(item)
            except ex.ExprError as err:
                raise ConfigError(key, f"formula {item!r}: {err}") from None
    if d.p is not None and d.b0 is None:
        raise ConfigError("params.path.p", "a p curve needs b0")


# ----------------------------------------------------------------------------
# structure


def _entries(raw, key: str, arity: int, bounds: tuple, dim: int) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, list):
        raise ConfigError(key, "expected a list of entries")
    out = {}
    for k, entry in enumerate(raw):
        where = f"{key}[{k}]"
        if not isinstance(entry, list) or len(entry) != arity + 1:
            raise ConfigError(where, f"expected [{', '.join(['index'] * arity)}, value]")
        idx, value = entry[:arity], entry[arity]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in idx):
            raise ConfigError(where, "indices must be integers")
        for v, hi in zip(idx, bounds):
            if not 1 <= v <= hi:
                raise ConfigError(key, f"index {v} outside 1..{hi} (dimension mismatch)")
        if isinstance(value, str):
            try:
                node = ex.parse(value, dim)
            except ex.ExprError as err:
                raise ConfigError(key, f"formula {value!r}: {err}") from None
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            node = ex.const(float(value))
        else:
            raise ConfigError(where, "value must be a formula string or a number")
        zb = tuple(v - 1 for v in idx)
        if zb in out:
            raise ConfigError(where, "entry given twice")
        out[zb] = node
    return out


def _int_field(raw: dict, key: str, where: str) -> int:
    v = raw.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{where}.{key}", "expected a positive integer")
    return v


def _check_keys(raw: dict, allowed: set, where: str):
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown key")


def _algebroid(raw, where: str, n: int, r: int, anchor_key: str, bracket_key: str) -> LieAlgebroidSpec:
    anchor = _entries(raw.get(anchor_key), f"{where}.{anchor_key}", 2, (n, r), n)
    bracket = _entries(raw.get(bracket_key), f"{where}.{bracket_key}", 3, (r, r, r), n)
    try:
        return LieAlgebroidSpec.build(n, r, anchor, bracket)
    except ValueError as err:
        raise ConfigError(f"{where}.{bracket_key}", str(err)) from None


def _proto(spec: BialgebroidSpec, raw: dict, where: str) -> BialgebroidSpec:
    if "h" not in raw and "h_dual" not in raw:
        return spec
    h = _entries(raw.get("h"), f"{where}.h", 3, (spec.r,) * 3, spec.n)
    hd = _entries(raw.get("h_dual"), f"{where}.h_dual", 3, (spec.r,) * 3, spec.n)
    try:
        return with_proto(spec, h=h, h_dual=hd)
    except ValueError as err:
        raise ConfigError(f"{where}.h", str(err)) from None


def _perturb(spec, raw, where: str):
    if raw is None:
        return spec
    if isinstance(spec, PoissonSpec):
        # perturbing the cotangent algebroid generally breaks the Poisson form
        spec = poisson_to_bialgebroid(spec)
    if not isinstance(raw, list):
        raise ConfigError(where, "expected a list")
    for k, item in enumerate(raw):
        at = f"{where}[{k}]"
        if not isinstance(item, dict):
            raise ConfigError(at, "expected an object")
        _check_keys(item, {"side", "kind", "key", "eps"}, at)
        side, kind, key, eps = item.get("side", "primal"), item.get("kind"), item.get("key"), item.get("eps")
        if side not in ("primal", "dual") or kind not in ("anchor", "bracket"):
            raise ConfigError(at, "side must be primal/dual and kind anchor/bracket")
        if not isinstance(eps, (int, float)) or isinstance(eps, bool):
            raise ConfigError(f"{at}.eps", "expected a number")
        arity = 2 if kind == "anchor" else 3
        if not isinstance(key, list) or len(key) != arity or not all(isinstance(v, int) for v in key):
            raise ConfigError(f"{at}.key", f"expected {arity} integer indices")
        alg = getattr(spec, side)
        bounds = (alg.n, alg.r) if kind == "anchor" else (alg.r,) * 3
        if not all(1 <= v <= hi for v, hi in zip(key, bounds)):
            raise ConfigError(f"{at}.key", "index out of range")
        try:
            new = alg.perturbed(kind, tuple(v - 1 for v in key), float(eps))
        except ValueError as err:
            raise ConfigError(f"{at}.key", str(err)) from None
        spec = BialgebroidSpec(new, spec.dual, spec.h, spec.h_dual, spec.name) if side == "primal" else BialgebroidSpec(spec.primal, new, spec.h, spec.h_dual, spec.name)
    return spec


def parse_structure(raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError("structure", "expected an object")
    forms = [k for k in ("builtin", "poisson", "algebroid", "bialgebroid") if k in raw]
    if len(forms) != 1:
        raise ConfigError("structure", "give exactly one of builtin, poisson, algebroid, bialgebroid")
    form = forms[0]
    if form == "builtin":
        _check_keys(raw, {"builtin", "h", "h_dual", "perturb"}, "structure")
        name = raw["builtin"]
        try:
            spec = builtin(name) if isinstance(name, str) else None
        except KeyError:
            spec = None
        if spec is None:
            raise ConfigError("structure.builtin", f"unknown builtin {name!r}")
        if "h" in raw or "h_dual" in raw:
            if isinstance(spec, PoissonSpec):
                raise ConfigError("structure.h", "proto terms need an algebroid structure")
            spec = _proto(spec, raw, "structure")
        return _perturb(spec, raw.get("perturb"), "structure.perturb")
    _check_keys(raw, {form, "perturb"}, "structure")
    body = raw[form]
    where = f"structure.{form}"
    if not isinstance(body, dict):
        raise ConfigError(where, "expected an object")
    if form == "poisson":
        _check_keys(body, {"dim", "pi"}, where)
        n = _int_field(body, "dim", where)
        entries = _entries(body.get("pi"), f"{where}.pi", 2, (n, n), n)
        try:
            spec = PoissonSpec.build(n, entries)
        except ValueError as err:
            raise ConfigError(f"{where}.pi", str(err)) from None
        return _perturb(spec, raw.get("perturb"), "structure.perturb")
    keys = {"dim", "rank", "anchor", "bracket"}
    if form == "bialgebroid":
        keys |= {"dual_anchor", "dual_bracket", "h", "h_dual"}
    _check_keys(body, keys, where)
    n, r = _int_field(body, "dim", where), _int_field(body, "rank", where)
    primal = _algebroid(body, where, n, r, "anchor", "bracket")
    if form == "algebroid":
        spec = BialgebroidSpec.from_algebroid(primal)
    else:
        dual = _algebroid(body, where, n, r, "dual_anchor", "dual_bracket")
        spec = _proto(BialgebroidSpec(primal, dual), body, where)
    return _perturb(spec, raw.get("perturb"), "structure.perturb")


def structure_config(spec) -> dict:
    """Inline structure entry reproducing ``spec`` (inverse of parsing)."""
    if isinstance(spec, PoissonSpec):
        return {"poisson": spec.describe()}
    if isinstance(spec, LieAlgebroidSpec):
        spec = BialgebroidSpec.from_algebroid(spec)
    d = spec.describe()
    body = {
        "dim": spec.n,
        "rank": spec.r,
        "anchor": d["primal"]["anchor"],
        "bracket": d["primal"]["bracket"],
        "dual_anchor": d["dual"]["anchor"],
        "dual_bracket": d["dual"]["bracket"],
    }
    if "h" in d:
        body["h"], body["h_dual"] = d["h"], d["h_dual"]
    return {"bialgebroid": body}


# ----------------------------------------------------------------------------
# schema

_ENTRY = {"type": "array", "items": {"type": ["integer", "string", "number"]}}
_ENTRIES = {"type": "array", "items": _ENTRY}


def _dataclass_schema(cls) -> dict:
    props = {}
    for f in fields(cls):
        default = getattr(cls(), f.name)
        if f.name in _NESTED and cls is Params:
            props[f.name] = _dataclass_schema(_NESTED[f.name])
            continue
        if isinstance(default, bool):
            kind = "boolean"
        elif isinstance(default, int):
            kind = "integer"
        elif isinstance(default, float):
            kind = "number"
        elif isinstance(default, list):
            kind = "array"
        else:
            kind = ["string", "array", "null"]
        props[f.name] = {"type": kind, "default": default}
    return {"type": "object", "additionalProperties": False, "properties": props}


def config_schema() -> dict:
    """JSON Schema of the configuration file (shipped as config.schema.json)."""
    algebroid = {"dim": {"type": "integer", "minimum": 1}, "rank": {"type": "integer", "minimum": 1}, "anchor": _ENTRIES, "bracket": _ENTRIES}
    bialgebroid = dict(algebroid, dual_anchor=_ENTRIES, dual_bracket=_ENTRIES, h=_ENTRIES, h_dual=_ENTRIES)
    perturb = {
        "type": "array",
        "items": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "side": {"enum": ["primal", "dual"]},
                "kind": {"enum": ["anchor", "bracket"]},
                "key": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "eps": {"type": "number"},
            },
        },
    }

    def form(name, body):
        return {"type": "object", "additionalProperties": False, "required": [name], "properties": {name: body, "perturb": perturb}}

    obj = lambda props, req: {"type": "object", "additionalProperties": False, "required": req, "properties": props}
    structure = {
        "oneOf": [
            {"type": "object", "additionalProperties": False, "required": ["builtin"],
             "properties": {"builtin": {"type": "string"}, "h": _ENTRIES, "h_dual": _ENTRIES, "perturb": perturb}},
            form("poisson", obj({"dim": {"type": "integer", "minimum": 1}, "pi": _ENTRIES}, ["dim"])),
            form("algebroid", obj(algebroid, ["dim", "rank"])),
            form("bialgebroid", obj(bialgebroid, ["dim", "rank"])),
        ]
    }
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "qpreduce configuration",
        "type": "object",
        "additionalProperties": False,
        "required": ["structure"],
        "properties": {"structure": structure, "params": _dataclass_schema(Params)},
    }


# ----------------------------------------------------------------------------
# loading


def parse_config(raw) -> ToolConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "the configuration must be a JSON object")
    _check_keys(raw, {"structure", "params"}, "")
    if "structure" not in raw:
        raise ConfigError("structure", "missing")
    spec = parse_structure(raw["structure"])
    params = _fill(Params, raw.get("params", {}), "params")
    _validate_params(params)
    r = spec.n if isinstance(spec, PoissonSpec) else spec.r
    _validate_path(params.path, spec.n, r)
    return ToolConfig(spec, raw["structure"], params)


def load_config(path) -> ToolConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError("", f"cannot read {path}: {err.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("", f"JSON parse error at line {err.lineno} column {err.colno}: {err.msg}") from None
    return parse_config(raw)
