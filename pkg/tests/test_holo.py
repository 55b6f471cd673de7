import math

import numpy as np
import pytest

from psido.holo import SpectralCut, complex_power_symbol, log_symbol, sectorial_projector_symbol
from psido.operators import laplacian_power, shifted_derivative
from psido.symbols import PeriodicMatrixFunction, SymbolError, identity_symbol, polynomial_symbol, star_product


@pytest.fixture
def variable():
    return polynomial_symbol([1.0, 0.0, PeriodicMatrixFunction.from_function(lambda x: 2 + math.sin(x), 64)])


def test_powers_compose(variable):
    half = complex_power_symbol(variable, 0.5)
    assert (star_product(half, half) - variable).max_norm() < 1e-4
    # the leading levels carry the accuracy; deep levels are limited by spectral differentiation
    assert np.max(np.abs((star_product(half, half) - variable).data[:4])) < 1e-8


def test_power_one_is_identity_map():
    base = laplacian_power(1.0)
    assert (complex_power_symbol(base, 1.0) - base).max_norm() < 1e-12


def test_negative_power_is_inverse():
    base = polynomial_symbol([np.array([[2.0, 0.3], [0.1, 1.5]]), 0 * np.eye(2), np.eye(2)])
    inv = complex_power_symbol(base, -1.0)
    assert (star_product(base, inv) - identity_symbol(2)).max_norm() < 1e-9


def test_log_of_multiplier_matches_pointwise_log():
    lap = laplacian_power(1.0)
    lg = log_symbol(lap, math.pi)
    n = np.array([1.0, 3.0, 10.0])
    assert np.allclose(np.ravel(lg.exact(n)), np.log(1 + n**2), atol=1e-12)
    # log(1 + xi^2) = 2 log|xi| + xi^-2 - ...
    assert lg.log_type == 1
    assert abs(lg.data[0, 1, 0, 0, 0, 0] - 2.0) < 1e-12
    assert abs(lg.data[2, 0, 0, 0, 0, 0] - 1.0) < 1e-10


def test_log_of_product_of_powers():
    lap = laplacian_power(1.0)
    a = complex_power_symbol(lap, 0.3)
    assert (log_symbol(a) - log_symbol(lap) * 0.3).max_norm() < 1e-10


def test_cut_through_spectrum_is_rejected():
    with pytest.raises(SymbolError):
        log_symbol(laplacian_power(1.0), 0.0)


def test_shifted_derivative_cuts():
    d = shifted_derivative(0.3, math.pi / 2)
    lg = log_symbol(d, math.pi / 2)
    # arguments lie in (cut - 2 pi, cut): the negative side carries -i pi
    assert abs(lg.data[0, 0, 0, 0, 0, 0]) < 1e-12
    assert abs(lg.data[0, 0, 1, 0, 0, 0] + 1j * math.pi) < 1e-12


def test_sectorial_projector_picks_the_negative_modes():
    d = shifted_derivative(0.3, math.pi / 2)
    proj = sectorial_projector_symbol(d, math.pi / 2, 3 * math.pi / 2)
    lead = proj.data[0, 0, :, 0, 0, 0]
    assert np.allclose(lead, [0.0, 1.0], atol=1e-10)
    assert np.max(np.abs(proj.data[1:])) < 1e-10


def test_spectral_cut_log_branch():
    cut = SpectralCut(math.pi / 2)
    assert abs(cut.log(np.array([-1.0]))[0] + 1j * math.pi) < 1e-15
    assert abs(cut.log(np.array([-1j]))[0] + 0.5j * math.pi) < 1e-15
