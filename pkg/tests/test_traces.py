import math

import numpy as np
import pytest

from psido.holo import complex_power_symbol, log_symbol
from psido.operators import laplacian_power, shifted_derivative
from psido.symbols import PeriodicMatrixFunction, polynomial_symbol, star_product
from psido.traces import (
    ResidueObstruction,
    canonical_trace,
    cutoff_trace_density,
    residue,
    weighted_trace,
    weighted_trace_commutator,
    weighted_trace_direct,
)

# zeta-regularized lattice sums evaluated with mpmath (binomial expansion + Hurwitz zeta)
TR_QUARTER = 1.7474521895293176  # TR (1 - Lap)^(1/4)
TRQ_INV_HALF = 1.3899655908690381  # tr^Q (1 - Lap)^(-1/2), Q = (1 - Lap)^(1/2)
TR_SHIFTED = 4.4101643989933766  # TR (2 - Lap)^(-3/4)


def test_residue_of_inverse_half_laplacian():
    assert abs(residue(laplacian_power(-0.5)) - 2.0) < 1e-12


def test_residue_scales_with_coefficient():
    sym = polynomial_symbol([0.0, 0.0, PeriodicMatrixFunction.from_function(lambda x: 2 + math.sin(x), 64)])
    inv = complex_power_symbol(sym + 1.0, -0.5)
    # res = int (2 + sin x)^(-1/2) dx / 2 pi * 2
    ref = 2 * np.mean((2 + np.sin(2 * np.pi * np.arange(4096) / 4096)) ** -0.5)
    assert abs(residue(inv) - ref) < 1e-10


def test_residue_vanishes_on_differential_symbols():
    assert residue(polynomial_symbol([1.0, 2.0, 3.0])) == 0


def test_canonical_trace_matches_lattice_oracle():
    assert abs(canonical_trace(laplacian_power(0.25)) - TR_QUARTER) < 1e-10
    assert abs(canonical_trace(laplacian_power(-0.75, shift=2.0)) - TR_SHIFTED) < 1e-9


def test_canonical_trace_obstructed_at_integer_order():
    with pytest.raises(ResidueObstruction):
        canonical_trace(laplacian_power(-0.5))


def test_weighted_trace_defect_formula():
    q = laplacian_power(0.5)
    assert abs(weighted_trace(laplacian_power(-0.5), q, math.pi) - TRQ_INV_HALF) < 1e-10


def test_weighted_trace_direct_fit():
    q = laplacian_power(0.5)
    fit = weighted_trace_direct(laplacian_power(-0.5), q, math.pi)
    assert abs(fit.value - TRQ_INV_HALF) < 1e-8
    assert abs(fit.simple_pole - 2.0) < 1e-6  # res(A) / q


def test_weighted_trace_of_commutator_equals_residue_expressions():
    a = polynomial_symbol([np.array([[2.0, 0.3], [-0.1, 1.5]]), np.array([[0.0, 0.2], [0.4, 0.0]]), np.eye(2)])
    b = complex_power_symbol(polynomial_symbol([np.array([[1.5, 0.1], [0.2, 1.2]]), 0 * np.eye(2), np.eye(2)]), 0.5)
    q = complex_power_symbol(polynomial_symbol([np.eye(2), 0 * np.eye(2), np.diag([1.0, 2.0])]), 0.5)
    rep = weighted_trace_commutator(a, b, q, math.pi)
    assert abs(rep.via_a - rep.via_b) < 1e-10
    assert abs(rep.via_a - rep.commutator_trace) < 1e-10
    assert abs(rep.via_a) > 1e-4


def test_chart_local_trace_is_cutoff_stable():
    d = star_product(shifted_derivative(0.3), laplacian_power(-0.75))
    t1 = cutoff_trace_density(d, 1e3).integral
    t2 = cutoff_trace_density(d, 2e3).integral
    assert abs(t1 - t2) < 1e-8


def test_residue_of_log_times_operator():
    # res((1 - Lap)^(-1/2) log (1 - Lap)) picks the log|xi| coefficient of the degree -1 term
    lap = laplacian_power(1.0)
    val = residue(star_product(laplacian_power(-0.5), log_symbol(lap)))
    assert abs(val) < 1e-12
