import math

import mpmath as mp
import numpy as np
import pytest

from psido.operators import laplacian_power, operator, shifted_derivative
from psido.spectral import (
    MultiplierOperator,
    PoleError,
    anomaly_spectral,
    canonical_trace_spectral,
    det_zeta_spectral,
    log_det_spectral,
    pole_residue,
    zeta,
    zeta_at_zero,
    zeta_prime_zero,
)


@pytest.fixture(scope="module")
def half_laplacian():
    return MultiplierOperator(lambda n: np.sqrt(1 + n**2)[:, None, None], 1.0, name="(1-Lap)^(1/2)")


def test_zeta_at_two_is_pi_coth_pi(half_laplacian):
    assert abs(zeta(half_laplacian, 2).value - math.pi / math.tanh(math.pi)) < 1e-11


def test_zeta_at_half_matches_mpmath(half_laplacian):
    # sum (1+n^2)^(-1/4)... is divergent; s = 3 is convergent and checked directly
    ref = 1 + 2 * mp.nsum(lambda n: (1 + n**2) ** mp.mpf(-1.5), [1, mp.inf])
    assert abs(zeta(half_laplacian, 3).value - float(ref)) < 1e-11


def test_zeta_at_zero_and_pole(half_laplacian):
    assert abs(zeta_at_zero(half_laplacian).value) < 1e-9
    assert abs(pole_residue(half_laplacian, 1.0) - 2.0) < 1e-9
    with pytest.raises(PoleError):
        zeta(half_laplacian, 1.0)


def test_zeta_determinant_of_one_minus_laplacian():
    lap = operator(laplacian_power(1.0), math.pi).multiplier()
    assert abs(det_zeta_spectral(lap) / (4 * math.sinh(math.pi) ** 2) - 1) < 1e-8
    assert abs(zeta_prime_zero(lap) + math.log(4 * math.sinh(math.pi) ** 2)) < 1e-8


def test_log_det_of_shifted_derivative():
    d = operator(shifted_derivative(0.3), math.pi / 2).multiplier()
    # det_zeta(D + c) = 1 - exp(2 pi i c) (up to the branch); modulus and phase from the closed form
    val = log_det_spectral(d)
    ref = complex(mp.log(2 * mp.sin(mp.pi * 0.3)))
    assert abs(val.real - ref.real) < 1e-8
    assert abs(val.imag - 0.2 * math.pi) < 1e-8


def test_commuting_anomaly_of_shifted_derivative():
    d = operator(shifted_derivative(0.3), math.pi / 2).multiplier()
    q = operator(laplacian_power(0.5), math.pi).multiplier()
    assert abs(anomaly_spectral(d, q) - 0.15j * math.pi) < 1e-8


def test_canonical_trace_spectral():
    a = operator(laplacian_power(0.25), math.pi).multiplier()
    assert abs(canonical_trace_spectral(a) - 1.7474521895293176) < 1e-7
