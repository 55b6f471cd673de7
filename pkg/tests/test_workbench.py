import math

import numpy as np
import pytest

from psido import expressions as ex
from psido.traces import residue
from psido.workbench import SpecError, build_operator, load_config, operator_from_expression, parse_operator

ROOT = __import__("pathlib").Path(__file__).resolve().parents[1]


@pytest.mark.parametrize(
    "text",
    ["1+n^2", "(1+n^2)^-0.5", "-x^2", "(2+sin(x))*xi^2+1", "sqrt(1+n^2)/(3-i*n)", "2^3^2", "exp(log(n+1)) - -n", "n-(x-xi)"],
)
def test_emit_round_trip(text):
    tree = ex.parse(text)
    assert ex.parse(ex.emit(tree)) == tree


def test_power_is_right_associative():
    assert ex.evaluate(ex.parse("2^3^2")) == 512


def test_unknown_identifier_position():
    with pytest.raises(ex.ExpressionError) as err:
        ex.parse("1 + n*\n  foo(n)")
    assert (err.value.line, err.value.column) == (2, 3)


def test_evaluation_is_deterministic():
    n = np.arange(-5.0, 6.0)
    tree = ex.parse("sqrt(1+n^2) + i*sin(n)")
    assert np.array_equal(ex.evaluate(tree, n=n), ex.evaluate(tree, n=n))


def test_power_multiplier_example():
    spec = parse_operator('{"kind":"power_multiplier","base":"1+n^2","exponent":0.5,"cut":3.14159265}')
    built = build_operator(spec)
    n = np.arange(-4.0, 5.0)
    assert np.allclose(built.multiplier(n)[:, 0, 0], np.sqrt(1 + n**2), atol=1e-14)
    assert built.operator.order == 1


def test_shifted_derivative_example():
    built = build_operator(parse_operator('{"kind":"shifted_first_order","c":0.3,"cut":1.5707963}'))
    assert np.allclose(built.multiplier(np.array([0.0, 2.0]))[:, 0, 0], [0.3, 2.3])


def test_malformed_exponent_names_field():
    text = '{"kind":"power_multiplier","base":"1+n^2","exponent":"½","cut":3.14159265}'
    with pytest.raises(SpecError, match=r"^exponent: .*line 1, column 1"):
        parse_operator(text)
    with pytest.raises(SpecError, match=r"^pairs\[0\]\.a\.exponent"):
        parse_operator(text, "pairs[0].a")


def test_x_rejected_in_multiplier():
    with pytest.raises(SpecError, match="base.*not allowed in a multiplier"):
        parse_operator({"kind": "power_multiplier", "base": "1+x*n^2", "exponent": 0.5})


def test_unknown_kind_and_bad_json():
    with pytest.raises(SpecError, match="kind"):
        parse_operator({"kind": "heat"})
    with pytest.raises(SpecError, match="line 1, column"):
        parse_operator('{"kind": ')


def test_spec_round_trip():
    spec = parse_operator({"kind": "variable_symbol", "symbol": "(2+sin(x))*xi^2+1", "grid": 32, "name": "X"})
    assert parse_operator(spec.to_json()) == spec


def test_expression_shorthand():
    assert abs(residue(operator_from_expression("(1+n^2)^-0.5").operator.symbol) - 2) < 1e-12
    with pytest.raises(SpecError):
        operator_from_expression("n + x")


@pytest.mark.parametrize("name", ["half_laplacian", "shifted_derivative", "variable_coefficient"])
def test_shipped_operator_configs_build(name):
    cfg = load_config(ROOT / "configs" / "operators" / f"{name}.json")
    built = build_operator(parse_operator(cfg))
    assert built.operator.symbol.depth > 0
