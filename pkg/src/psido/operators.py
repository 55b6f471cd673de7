"""Ready-made operators on the circle: symbols paired with their cuts and mode maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .holo import SpectralCut, _as_cut, complex_power_symbol
from .spectral import MultiplierOperator, multiplier_from_symbol
from .symbols import (
    DEFAULT_DEPTH,
    ExactSymbol,
    LogPolyhomSymbol,
    PeriodicMatrixFunction,
    PolyhomSymbol,
    SymbolError,
    constant_symbol,
    polynomial_symbol,
)


@dataclass(frozen=True, eq=False)
class Operator:
    """A symbol together with the spectral cut used for its powers and logarithm."""

    symbol: LogPolyhomSymbol
    cut: SpectralCut
    name: str = ""

    @property
    def order(self) -> complex:
        return self.symbol.order

    @property
    def is_multiplier(self) -> bool:
        return self.symbol.grid_size == 1 and self.symbol.exact is not None

    def multiplier(self) -> MultiplierOperator:
        return multiplier_from_symbol(self.symbol, self.cut, self.name)


def operator(symbol: LogPolyhomSymbol, cut=None, name: str = "") -> Operator:
    return Operator(symbol, _as_cut(cut), name)


def laplacian_power(power: float, shift: float = 1.0, rank: int = 1, depth: int = DEFAULT_DEPTH) -> PolyhomSymbol:
    """Symbol of ``(shift - Delta)^power`` times the identity of size ``rank``."""
    base = polynomial_symbol([shift * np.eye(rank), 0 * np.eye(rank), np.eye(rank)], depth)
    if float(power).is_integer() and power > 0:
        out = base
        for _ in range(int(power) - 1):
            out = out @ base
        return out
    return complex_power_symbol(base, power, SpectralCut(math.pi), depth)


def _bump(xi: np.ndarray, centre: float) -> np.ndarray:
    """Smooth bump of height 1 supported on ``|xi - centre| < 1``."""
    r2 = np.minimum((xi - centre) ** 2, 1.0)
    with np.errstate(divide="ignore"):
        return np.where(r2 < 1.0, np.exp(1.0 - 1.0 / (1.0 - r2)), 0.0)


def shifted_derivative(c: complex, cut=math.pi / 2, strength: float = 0.5, depth: int = DEFAULT_DEPTH) -> PolyhomSymbol:
    """Symbol of ``D + c`` (``D = -i d/dx``).

    Its homogeneous part is ``xi + c``.  The full symbol used away from the
    integers is ``xi + c -+ i beta sin^2(pi xi) phi(xi)`` with ``phi`` a bump
    around the zero of ``xi + c``: it agrees with ``n + c`` at every integer
    but stays off the cut ray, so pointwise logarithms and powers are
    continuous in ``xi``.  The sign of the deformation is chosen to avoid
    the ray of ``cut``.
    """
    cut = _as_cut(cut)
    sym = polynomial_symbol([c, 1.0], depth)
    centre = -float(np.real(c))
    # push the zero crossing into the half plane away from the ray
    side = -1.0 if math.sin(cut.angle) > 0 else 1.0

    def fn(xi):
        vals = xi + c + 1j * side * strength * np.sin(np.pi * xi) ** 2 * _bump(xi, centre)
        return vals[:, None, None]

    return PolyhomSymbol(sym.order, sym.data, ExactSymbol(fn), sym.cutoff)


def matrix_polynomial(coefficients, depth: int = DEFAULT_DEPTH, grid: int | None = None) -> PolyhomSymbol:
    return polynomial_symbol(coefficients, depth, grid)


def variable_coefficient(fn, grid: int = 64) -> PeriodicMatrixFunction:
    """Sample a periodic (matrix-valued) function of ``x`` for use in :func:`polynomial_symbol`."""
    return PeriodicMatrixFunction.from_function(fn, grid)


def perturbed_half_laplacian(perturbation, depth: int = DEFAULT_DEPTH) -> PolyhomSymbol:
    """``(1 - Delta)^{1/2} I + P`` for a constant matrix ``P``."""
    p = np.atleast_2d(np.asarray(perturbation, dtype=complex))
    return laplacian_power(0.5, rank=p.shape[0], depth=depth) + constant_symbol(p, depth)
