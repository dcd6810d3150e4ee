import json
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from qpreduce import config as cf
from qpreduce import structures as sts


def parse(raw):
    return cf.parse_config(raw)


def error_key(raw):
    with pytest.raises(cf.ConfigError) as info:
        parse(raw)
    return info.value.key, str(info.value)


def test_builtin_reference_is_valid():
    cfg = parse({"structure": {"builtin": "so3"}})
    assert isinstance(cfg.structure, sts.BialgebroidSpec)
    assert cfg.structure.r == 3


def test_missing_tolerances_get_documented_defaults():
    tol = parse({"structure": {"builtin": "so3"}}).params.tolerances
    assert tol.identity == 1e-8 and tol.flow == 1e-6


def test_partial_tolerances_keep_other_defaults():
    tol = parse({"structure": {"builtin": "so3"}, "params": {"tolerances": {"flow": 1e-3}}}).params.tolerances
    assert tol.flow == 1e-3 and tol.identity == 1e-8


def test_pi_with_mismatched_dimension_names_the_key():
    key, msg = error_key({"structure": {"poisson": {"dim": 2, "pi": [[1, 3, "x1"]]}}})
    assert key == "structure.poisson.pi"
    assert key.split(".")[-1] == "pi"


def test_expression_errors_show_the_formula():
    key, msg = error_key({"structure": {"poisson": {"dim": 2, "pi": [[1, 2, "x1 +* 2"]]}}})
    assert key == "structure.poisson.pi" and "x1 +* 2" in msg


def test_formula_using_a_variable_beyond_the_dimension():
    key, msg = error_key({"structure": {"poisson": {"dim": 2, "pi": [[1, 2, "x3"]]}}})
    assert "x3" in msg


@pytest.mark.parametrize(
    "raw, key",
    [
        ({"structure": {"builtin": "so3"}, "extra": 1}, "extra"),
        ({"structure": {"builtin": "so3"}, "params": {"bogus": 1}}, "params.bogus"),
        ({"structure": {"builtin": "so3"}, "params": {"torus": {"nz": 3}}}, "params.torus.nz"),
        ({"structure": {"builtin": "so3", "color": "red"}}, "structure.color"),
        ({"structure": {"poisson": {"dim": 2, "pi": [], "rank": 1}}}, "structure.poisson.rank"),
    ],
)
def test_unknown_keys_are_rejected(raw, key):
    assert error_key(raw)[0] == key


@pytest.mark.parametrize(
    "params, key",
    [
        ({"N": -1}, "params.N"),
        ({"N": 2.5}, "params.N"),
        ({"samples": True}, "params.samples"),
        ({"tolerances": {"flow": "a"}}, "params.tolerances.flow"),
        ({"tolerances": {"flow": -1.0}}, "params.tolerances.flow"),
        ({"times": [0.5, 2.0]}, "params.times"),
        ({"torus": {"nx": 1}}, "params.torus"),
    ],
)
def test_bad_parameter_values(params, key):
    assert error_key({"structure": {"builtin": "so3"}, "params": params})[0] == key


def test_structure_needs_exactly_one_form():
    assert error_key({"structure": {}})[0] == "structure"
    assert error_key({"structure": {"builtin": "so3", "poisson": {"dim": 1}}})[0] == "structure"
    assert error_key({"params": {}})[0] == "structure"


def test_unknown_builtin():
    assert error_key({"structure": {"builtin": "so4"}})[0] == "structure.builtin"


def test_proto_terms_on_a_builtin():
    cfg = parse({"structure": {"builtin": "so3", "h": [[1, 2, 3, "0.5"]]}})
    assert cfg.structure.h


def test_proto_terms_refused_on_poisson_builtin():
    assert error_key({"structure": {"builtin": "poisson:so3star", "h": [[1, 2, 3, "1"]]}})[0] == "structure.h"


def test_perturbation_adds_to_one_entry():
    cfg = parse({"structure": {"builtin": "so3", "perturb": [{"kind": "bracket", "key": [1, 2, 3], "eps": 1e-3}]}})
    node = cfg.structure.primal.bracket[(0, 1, 2)]
    from qpreduce import expr as ex

    assert ex.evaluate(node, [0.0]) == pytest.approx(1.001, abs=1e-15)


def test_perturbation_key_out_of_range():
    key, _ = error_key({"structure": {"builtin": "so3", "perturb": [{"kind": "bracket", "key": [1, 2, 4], "eps": 1e-3}]}})
    assert key == "structure.perturb[0].key"


def test_path_formulas_are_validated_on_load():
    key, msg = error_key({"structure": {"builtin": "so3"}, "params": {"path": {"a": ["1", "t+", "0"]}}})
    assert key == "params.path.a" and "t+" in msg
    key, _ = error_key({"structure": {"builtin": "so3"}, "params": {"path": {"a": ["1"]}}})
    assert key == "params.path.a"


def test_time_formula_substitutes_only_the_variable_t():
    from qpreduce import expr as ex

    node = cf.time_formula("sqrt(t) + t^2")
    assert ex.evaluate(node, [4.0]) == pytest.approx(18.0)


def test_json_parse_error_reports_location(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"structure": {"builtin": "so3"},\n  "params": {"N": 5,}\n}', encoding="utf-8")
    with pytest.raises(cf.ConfigError, match="line 2 column"):
        cf.load_config(p)


def test_unreadable_file(tmp_path):
    with pytest.raises(cf.ConfigError, match="cannot read"):
        cf.load_config(tmp_path / "missing.json")


@pytest.mark.parametrize("name", ["so3", "poisson:so3star", "poisson:constant2d", "coalgebra:so3", "tangent:R^2"])
def test_inline_round_trip_preserves_values(name):
    import numpy as np

    spec = sts.builtin(name)
    again = parse({"structure": cf.structure_config(spec)}).structure
    pts = np.random.default_rng(0).normal(size=(5, spec.n))
    if isinstance(spec, sts.PoissonSpec):
        assert np.array_equal(spec.matrix(pts), again.matrix(pts))
    else:
        assert sts.cross_oracle_gap(again.primal, pts) == 0.0
        assert again.describe()["primal"]["anchor"] == sts.as_bialgebroid(spec).describe()["primal"]["anchor"]


def test_shipped_schema_matches_the_dataclasses():
    text = resources.files("qpreduce").joinpath("config.schema.json").read_text(encoding="utf-8")
    assert json.loads(text) == json.loads(json.dumps(cf.config_schema()))


def test_schema_defaults_match_params_defaults():
    props = cf.config_schema()["properties"]["params"]["properties"]
    for key, value in cf.DEFAULTS.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                assert props[key]["properties"][sub]["default"] == v
        else:
            assert props[key]["default"] == value


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10_000), st.integers(2, 5000), st.floats(1e-14, 1.0))
def test_valid_params_are_echoed(samples, N, flow):
    cfg = parse({"structure": {"builtin": "so3"}, "params": {"samples": samples, "N": N, "tolerances": {"flow": flow}}})
    echo = cfg.echo()
    assert echo["params"]["samples"] == samples and echo["params"]["N"] == N
    assert echo["params"]["tolerances"]["flow"] == flow
