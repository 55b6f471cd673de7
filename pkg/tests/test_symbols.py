import math

import numpy as np
import pytest

from psido.operators import laplacian_power
from psido.symbols import (
    ALTERNATE_CUTOFF,
    PeriodicMatrixFunction,
    SymbolError,
    batch_inverse,
    commutator_symbol,
    constant_symbol,
    identity_symbol,
    inverse_symbol,
    polynomial_symbol,
    star_product,
    symbol_from_json,
    symbol_to_json,
    x_derivative,
)


def _periodic(fn, g=64):
    return PeriodicMatrixFunction.from_function(fn, g)


@pytest.fixture
def variable():
    return polynomial_symbol([1.0, 0.0, _periodic(lambda x: 2 + math.sin(x))])


def test_batch_inverse_matches_numpy():
    rng = np.random.default_rng(0)
    for m in (1, 2, 3):
        a = rng.standard_normal((5, m, m)) + 1j * rng.standard_normal((5, m, m)) + 3 * np.eye(m)
        assert np.allclose(batch_inverse(a), np.linalg.inv(a), atol=1e-13)


def test_spectral_derivative_of_sine():
    x = 2 * np.pi * np.arange(32) / 32
    d = x_derivative(np.sin(x)[:, None, None], 3, axis=0)[:, 0, 0]
    assert np.allclose(d, -np.cos(x), atol=1e-12)


def test_identity_is_neutral(variable):
    one = identity_symbol()
    assert (star_product(one, variable) - variable).max_norm() < 1e-14
    assert (star_product(variable, one) - variable).max_norm() < 1e-14


def test_star_product_is_associative(variable):
    b = polynomial_symbol([0.5, _periodic(lambda x: 1 + 0.3 * math.cos(x)), 0.0])
    c = laplacian_power(-0.5)
    left = star_product(star_product(variable, b), c)
    right = star_product(variable, star_product(b, c))
    assert (left - right).max_norm() < 1e-10


def test_commutator_of_multipliers_vanishes():
    a = laplacian_power(0.5)
    b = polynomial_symbol([2.0, 1.0, 1.0])
    assert commutator_symbol(a, b).max_norm() < 1e-13


def test_commutator_with_coefficient_is_derivative_term():
    # [xi, f(x)] has symbol -i f'(x)
    xi = polynomial_symbol([0.0, 1.0])
    f = polynomial_symbol([_periodic(lambda x: math.sin(x))])
    comm = commutator_symbol(xi, f)
    top = comm.data[1, 0, 0, :, 0, 0]  # degree 0 component at xi = +1
    x = 2 * np.pi * np.arange(64) / 64
    assert np.allclose(top, -1j * np.cos(x), atol=1e-12)


def test_inverse_symbol(variable):
    inv = inverse_symbol(variable)
    assert (star_product(variable, inv) - identity_symbol()).max_norm() < 1e-9
    assert inv.order == -2


def test_matrix_inverse_symbol():
    a = polynomial_symbol([np.array([[2.0, 0.3], [0.1, 1.5]]), np.array([[0.0, 0.2], [0.4, 0.0]]), np.eye(2)])
    inv = inverse_symbol(a)
    assert (star_product(inv, a) - identity_symbol(2)).max_norm() < 1e-10


def test_adding_non_integer_order_difference_fails():
    with pytest.raises(SymbolError):
        laplacian_power(0.5) + laplacian_power(0.25)


def test_json_round_trip(variable):
    back = symbol_from_json(symbol_to_json(variable))
    assert (back - variable).max_norm() == 0.0
    assert back.order == variable.order


def test_cutoff_change_keeps_components():
    s = laplacian_power(0.25)
    alt = s.with_cutoff(ALTERNATE_CUTOFF)
    assert np.array_equal(alt.data, s.data)
    assert alt.cutoff == ALTERNATE_CUTOFF


def test_constant_symbol_rank():
    assert constant_symbol(np.eye(3)).rank == 3
