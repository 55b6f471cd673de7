import math

import numpy as np
import pytest

from psido.anomaly import AnomalyError, L_symbol, auto_cut, check_path_endpoint, commuting_anomaly
from psido.holo import SpectralCut
from psido.traces import residue
from psido.verification import half_laplacian, matrix_pair_operator, shifted_d


def test_commuting_anomaly_closed_form():
    # (a b / 2(a+b)) res((log A - log B)^2) for D + 0.3 against (1 - Lap)^(1/2)
    val = commuting_anomaly(shifted_d(), half_laplacian())
    assert abs(val - 0.47123889803846886j) < 1e-10


def test_L_vanishes_for_commuting_multipliers():
    a, b = shifted_d(), half_laplacian()
    assert L_symbol(a, b).max_norm() < 1e-10


def test_L_residue_vanishes_for_matrix_pair():
    a, b = matrix_pair_operator(0), matrix_pair_operator(100)
    assert abs(residue(L_symbol(a, b))) < 1e-10


def test_auto_cut_avoids_positive_spectrum():
    cut = auto_cut(half_laplacian().symbol)
    assert abs(cut.angle - math.pi) < 1e-9


def test_auto_cut_matches_non_positive_spectrum():
    cut = auto_cut(matrix_pair_operator(0).symbol)
    vals = np.linalg.eigvals(matrix_pair_operator(0).multiplier()(np.arange(-50.0, 51.0)))
    # no sampled eigenvalue lies within 0.1 rad of the chosen ray
    delta = np.angle(vals * np.exp(-1j * cut.angle))
    assert np.min(np.abs(delta)) > 0.1


def test_path_endpoint_rejects_inconsistent_cut():
    # D + 0.3 has spectrum on both sides of 0, so the two vertical cuts give different logarithms
    a, b = half_laplacian(), shifted_d()
    check_path_endpoint(a, b, SpectralCut(math.pi / 2))
    with pytest.raises(AnomalyError):
        check_path_endpoint(a, b, SpectralCut(-math.pi / 2))
