"""Truncated polyhomogeneous symbols on the circle.

A symbol of order ``a`` is stored through its homogeneous components
``sigma_{a-j,l}(x, xi) * log(|xi|)**l``.  In one dimension a positively
homogeneous function of ``xi`` is fixed by its values at ``xi = +1`` and
``xi = -1``, so every component is a pair of periodic matrix functions of
``x`` sampled on a uniform grid.

Internally the components of a symbol live in one array of shape
``(depth, log_type + 1, 2, grid, m, m)``; axis 2 indexes the side
(0 for ``xi = +1``, 1 for ``xi = -1``).  A grid of size one stands for an
``x``-independent (multiplier) symbol and broadcasts against any grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_DEPTH = 8
DEFAULT_GRID = 64
DEGREE_TOL = 1e-9

SIDES = np.array([1.0, -1.0])


def batch_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse over the last two axes; closed forms for 1x1 and 2x2 blocks."""
    m = a.shape[-1]
    if m == 1:
        return 1.0 / a
    if m == 2:
        p, q, r, s = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
        det = p * s - q * r
        out = np.empty_like(a, dtype=np.result_type(a, complex))
        out[..., 0, 0] = s / det
        out[..., 0, 1] = -q / det
        out[..., 1, 0] = -r / det
        out[..., 1, 1] = p / det
        return out
    return np.linalg.inv(a)


class SymbolError(ValueError):
    """Raised for inconsistent symbol data or unsupported operations."""


class DepthError(SymbolError):
    """Requested truncation depth exceeds what the inputs carry."""

    def __init__(self, requested: int, available: int):
        super().__init__(
            f"depth {requested} exceeds available component depth; max valid depth is {available}"
        )
        self.requested = requested
        self.available = available


class SingularSymbolError(SymbolError):
    """Leading component is not invertible somewhere on the grid."""

    def __init__(self, grid_index: int, side: int, smin: float):
        sign = "+" if side == 0 else "-"
        super().__init__(
            f"leading component singular at grid point {grid_index}, xi = {sign}1 "
            f"(smallest singular value {smin:.3e})"
        )
        self.grid_index = grid_index
        self.side = sign


# ---------------------------------------------------------------------------
# cut-off


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        g = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return f / (f + g)


@dataclass(frozen=True)
class Cutoff:
    """Smooth even cut-off vanishing for ``|xi| <= lower`` and equal to 1 for ``|xi| >= upper``."""

    lower: float = 0.5
    upper: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.lower < self.upper <= 1.0:
            raise SymbolError("cut-off needs 0 < lower < upper <= 1")

    def __call__(self, xi) -> np.ndarray:
        t = (np.abs(np.asarray(xi, dtype=float)) - self.lower) / (self.upper - self.lower)
        return _smooth_step(t)


DEFAULT_CUTOFF = Cutoff()
ALTERNATE_CUTOFF = Cutoff(0.6, 0.9)


# ---------------------------------------------------------------------------
# periodic matrix functions


def grid_points(grid_size: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(grid_size) / grid_size


def _wavenumbers(g: int) -> np.ndarray:
    return np.fft.fftfreq(g, d=1.0 / g)


def x_derivative(samples: np.ndarray, order: int, axis: int) -> np.ndarray:
    """Spectral derivative of periodic samples along ``axis``."""
    g = samples.shape[axis]
    if order == 0:
        return samples
    if g == 1:
        return np.zeros_like(samples)
    k = _wavenumbers(g)
    factor = (1j * k) ** order
    if g % 2 == 0 and order % 2 == 1:
        factor[g // 2] = 0.0
    shape = [1] * samples.ndim
    shape[axis] = g
    spec = np.fft.fft(samples, axis=axis) * factor.reshape(shape)
    return np.fft.ifft(spec, axis=axis)


@dataclass(frozen=True, eq=False)
class PeriodicMatrixFunction:
    """m x m matrix function of x on the circle, sampled at ``x_k = 2 pi k / g``."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise SymbolError("samples must have shape (grid, m, m)")
        object.__setattr__(self, "samples", s)

    @classmethod
    def constant(cls, matrix, grid_size: int = 1) -> "PeriodicMatrixFunction":
        mat = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(np.broadcast_to(mat, (grid_size,) + mat.shape).copy())

    @classmethod
    def from_function(cls, fn: Callable, grid_size: int = DEFAULT_GRID) -> "PeriodicMatrixFunction":
        x = grid_points(grid_size)
        vals = np.asarray([np.atleast_2d(fn(xk)) for xk in x], dtype=complex)
        return cls(vals)

    @property
    def grid_size(self) -> int:
        return self.samples.shape[0]

    @property
    def rank(self) -> int:
        return self.samples.shape[1]

    def derivative(self, order: int = 1) -> "PeriodicMatrixFunction":
        return PeriodicMatrixFunction(x_derivative(self.samples, order, axis=0))

    def is_constant(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.samples - self.samples[:1])) <= tol)

    def __call__(self, x: float) -> np.ndarray:
        """Trigonometric interpolation at an arbitrary point."""
        g = self.grid_size
        if g == 1:
            return self.samples[0].copy()
        coef = np.fft.fft(self.samples, axis=0) / g
        k = _wavenumbers(g)
        phase = np.exp(1j * k * x)
        if g % 2 == 0:
            phase[g // 2] = np.cos(g // 2 * x)
        return np.tensordot(phase, coef, axes=(0, 0))


@dataclass(frozen=True, eq=False)
class HomogComponent:
    """Positively homogeneous matrix function of degree ``degree`` in xi."""

    degree: complex
    plus_value: PeriodicMatrixFunction
    minus_value: PeriodicMatrixFunction

    def __post_init__(self):
        p, m = self.plus_value.samples, self.minus_value.samples
        if p.shape != m.shape:
            raise SymbolError("plus and minus values must share grid size and rank")

    def __call__(self, x_index: int, xi: float) -> np.ndarray:
        side = self.plus_value if xi > 0 else self.minus_value
        k = x_index if side.grid_size > 1 else 0
        return abs(xi) ** self.degree * side.samples[k]


# ---------------------------------------------------------------------------
# exact full-symbol evaluators


@dataclass(frozen=True, eq=False)
class ExactSymbol:
    """Closed-form full symbol.

    ``fn(xi)`` returns an array of shape ``(len(xi), m, m)`` for multipliers;
    with ``x_dependent=True`` it is called as ``fn(x, xi)`` and returns
    ``(len(x), len(xi), m, m)``.
    """

    fn: Callable
    x_dependent: bool = False

    def __call__(self, xi, x=None) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.x_dependent:
            if x is None:
                raise SymbolError("x-dependent evaluator needs x points")
            return np.asarray(self.fn(np.atleast_1d(x), xi), dtype=complex)
        out = np.asarray(self.fn(xi), dtype=complex)
        return out[None]

    def pointwise(self, other: "ExactSymbol", op: Callable) -> "ExactSymbol":
        if self.x_dependent or other.x_dependent:
            def fn(x, xi):
                return op(self(xi, x), other(xi, x))
            return ExactSymbol(fn, True)
        return ExactSymbol(lambda xi: op(self.fn(xi), other.fn(xi)))


# ---------------------------------------------------------------------------
# symbols


def _as_order(a) -> complex:
    a = complex(a)
    return a


def _real_if_close(a: complex):
    return a.real if abs(a.imag) < 1e-15 else a


@dataclass(frozen=True, eq=False)
class LogPolyhomSymbol:
    """Log-polyhomogeneous symbol truncated to ``depth`` homogeneous levels."""

    order: complex
    data: np.ndarray
    exact: ExactSymbol | None = None
    cutoff: Cutoff = field(default=DEFAULT_CUTOFF)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim != 6 or d.shape[2] != 2 or d.shape[4] != d.shape[5]:
            raise SymbolError("data must have shape (depth, log_type+1, 2, grid, m, m)")
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "order", _as_order(self.order))

    # shape information
    @property
    def depth(self) -> int:
        return self.data.shape[0]

    @property
    def log_type(self) -> int:
        return self.data.shape[1] - 1

    @property
    def grid_size(self) -> int:
        return self.data.shape[3]

    @property
    def rank(self) -> int:
        return self.data.shape[4]

    @property
    def is_multiplier(self) -> bool:
        if self.grid_size == 1:
            return True
        return bool(np.max(np.abs(self.data - self.data[:, :, :, :1])) <= 1e-12)

    def degree(self, j: int) -> complex:
        return self.order - j

    def component(self, j: int, l: int = 0) -> HomogComponent:
        return HomogComponent(
            self.degree(j),
            PeriodicMatrixFunction(self.data[j, l, 0]),
            PeriodicMatrixFunction(self.data[j, l, 1]),
        )

    @property
    def components(self) -> list[list[HomogComponent]]:
        return [[self.component(j, l) for l in range(self.log_type + 1)] for j in range(self.depth)]

    # construction helpers
    def _new(self, order, data, exact=None) -> "LogPolyhomSymbol":
        return make_symbol(order, data, exact, self.cutoff)

    def with_cutoff(self, cutoff: Cutoff) -> "LogPolyhomSymbol":
        return make_symbol(self.order, self.data, self.exact, cutoff)

    def without_exact(self) -> "LogPolyhomSymbol":
        return make_symbol(self.order, self.data, None, self.cutoff)

    def truncate(self, depth: int) -> "LogPolyhomSymbol":
        if depth > self.depth:
            raise DepthError(depth, self.depth)
        return self._new(self.order, self.data[:depth], self.exact)

    def with_log_type(self, k: int) -> "LogPolyhomSymbol":
        """Pad (or trim vanishing) log levels."""
        cur = self.log_type
        if k == cur:
            return self
        if k > cur:
            pad = np.zeros((self.depth, k - cur) + self.data.shape[2:], dtype=complex)
            return make_symbol(self.order, np.concatenate([self.data, pad], axis=1), self.exact, self.cutoff, keep_log=True)
        if np.max(np.abs(self.data[:, k + 1:]), initial=0.0) > 1e-10:
            raise SymbolError("cannot drop non-vanishing log components")
        return self._new(self.order, self.data[:, : k + 1], self.exact)

    def with_grid(self, g: int) -> "LogPolyhomSymbol":
        if g == self.grid_size:
            return self
        if self.grid_size != 1:
            raise SymbolError(f"grid mismatch: {self.grid_size} vs {g}")
        shape = list(self.data.shape)
        shape[3] = g
        return make_symbol(self.order, np.broadcast_to(self.data, shape).copy(), self.exact, self.cutoff, keep_log=True)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.data), initial=0.0))

    # arithmetic
    def _align(self, other: "LogPolyhomSymbol"):
        if not isinstance(other, LogPolyhomSymbol):
            raise TypeError("expected a symbol")
        if self.rank != other.rank:
            raise SymbolError(f"rank mismatch: {self.rank} vs {other.rank}")
        shift = other.order - self.order
        j = round(shift.real)
        if abs(shift - j) > DEGREE_TOL:
            raise SymbolError("orders differ by a non-integer; cannot add")
        a, b = self, other
        g = max(a.grid_size, b.grid_size)
        if min(a.grid_size, b.grid_size) not in (1, g):
            raise SymbolError(f"grid mismatch: {a.grid_size} vs {b.grid_size}")
        a, b = a.with_grid(g), b.with_grid(g)
        k = max(a.log_type, b.log_type)
        a, b = a.with_log_type(k), b.with_log_type(k)
        # express both on the degree ladder of the higher order
        if j >= 0:
            top, da, db = other.order, j, 0
        else:
            top, da, db = self.order, 0, -j
        depth = min(a.depth + da, b.depth + db)
        shape = (depth,) + a.data.shape[1:]
        A = np.zeros(shape, dtype=complex)
        B = np.zeros(shape, dtype=complex)
        A[da:] = a.data[: depth - da]
        B[db:] = b.data[: depth - db]
        return top, A, B

    def __add__(self, other):
        if np.isscalar(other):
            return self + identity_symbol(self.rank, self.depth) * other
        top, A, B = self._align(other)
        exact = None
        if self.exact is not None and other.exact is not None:
            exact = self.exact.pointwise(other.exact, np.add)
        return make_symbol(top, A + B, exact, self.cutoff)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        exact = None
        if self.exact is not None:
            e = self.exact
            exact = ExactSymbol((lambda *a: -e.fn(*a)), e.x_dependent)
        return self._new(self.order, -self.data, exact)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        exact = None
        if self.exact is not None:
            e = self.exact
            exact = ExactSymbol((lambda *a: c * e.fn(*a)), e.x_dependent)
        return self._new(self.order, self.data * c, exact)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __matmul__(self, other):
        return star_product(self, other)

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(order={_real_if_close(self.order)!r}, depth={self.depth}, "
            f"log_type={self.log_type}, grid={self.grid_size}, rank={self.rank})"
        )

    # evaluation
    def evaluate(self, x_index: int, xi, use_exact: bool = True) -> np.ndarray:
        return homog_eval(self, x_index, xi, use_exact=use_exact)

    def as_classical(self, tol: float = 1e-8) -> "PolyhomSymbol":
        """Drop log levels that vanish to within ``tol``."""
        if self.log_type and np.max(np.abs(self.data[:, 1:])) > tol:
            raise SymbolError(
                f"log components do not cancel (max {np.max(np.abs(self.data[:, 1:])):.3e})"
            )
        return PolyhomSymbol(self.order, self.data[:, :1], self.exact, self.cutoff)


class PolyhomSymbol(LogPolyhomSymbol):
    """Classical symbol: log type zero."""

    def __post_init__(self):
        super().__post_init__()
        if self.data.shape[1] != 1:
            raise SymbolError("classical symbols carry no log components")


def make_symbol(order, data, exact=None, cutoff=DEFAULT_CUTOFF, keep_log: bool = False) -> LogPolyhomSymbol:
    data = np.asarray(data, dtype=complex)
    if data.shape[1] == 1:
        return PolyhomSymbol(order, data, exact, cutoff)
    if not keep_log:
        # trim trailing log levels that vanish exactly
        k = data.shape[1]
        while k > 1 and not np.any(data[:, k - 1]):
            k -= 1
        if k == 1:
            return PolyhomSymbol(order, data[:, :1], exact, cutoff)
        data = data[:, :k]
    return LogPolyhomSymbol(order, data, exact, cutoff)


# ---------------------------------------------------------------------------
# constructors


def identity_symbol(rank: int = 1, depth: int = DEFAULT_DEPTH) -> PolyhomSymbol:
    data = np.zeros((depth, 1, 2, 1, rank, rank), dtype=complex)
    data[0, 0, :, 0] = np.eye(rank)
    eye = np.eye(rank, dtype=complex)
    return PolyhomSymbol(0, data, ExactSymbol(lambda xi: np.broadcast_to(eye, (len(xi), rank, rank)).copy()))


def zero_symbol(order, rank: int = 1, depth: int = DEFAULT_DEPTH, grid: int = 1) -> PolyhomSymbol:
    data = np.zeros((depth, 1, 2, grid, rank, rank), dtype=complex)
    return PolyhomSymbol(order, data)


def constant_symbol(matrix, depth: int = DEFAULT_DEPTH) -> PolyhomSymbol:
    mat = np.atleast_2d(np.asarray(matrix, dtype=complex))
    m = mat.shape[0]
    data = np.zeros((depth, 1, 2, 1, m, m), dtype=complex)
    data[0, 0, :, 0] = mat
    return PolyhomSymbol(0, data, ExactSymbol(lambda xi: np.broadcast_to(mat, (len(xi), m, m)).copy()))


def polynomial_symbol(coefficients: Sequence, depth: int = DEFAULT_DEPTH, grid: int | None = None) -> PolyhomSymbol:
    """Symbol ``sum_k c_k(x) xi**k``.

    ``coefficients[k]`` is a scalar, an m x m matrix, or a
    :class:`PeriodicMatrixFunction` (for x-dependent coefficients).
    """
    coefs = list(coefficients)
    while len(coefs) > 1 and _is_zero_coef(coefs[-1]):
        coefs.pop()
    deg = len(coefs) - 1
    samples = [_coef_samples(c) for c in coefs]
    m = samples[0].shape[1]
    g = max(s.shape[0] for s in samples) if grid is None else grid
    data = np.zeros((depth, 1, 2, g, m, m), dtype=complex)
    for j in range(min(depth, deg + 1)):
        k = deg - j
        for side, s in enumerate(SIDES):
            data[j, 0, side] = samples[k] * s**k
    x_dep = g > 1

    def _eval(xv, xi):
        out = 0
        for k, c in enumerate(coefs):
            if isinstance(c, PeriodicMatrixFunction):
                vals = np.asarray([c(xx) for xx in xv])[:, None]
            else:
                vals = np.broadcast_to(np.atleast_2d(np.asarray(c, dtype=complex)), (1, 1, m, m))
            out = out + vals * (xi[None, :, None, None] ** k)
        return np.broadcast_to(out, (len(xv), len(xi), m, m)).copy()

    if x_dep:
        exact = ExactSymbol(_eval, True)
    else:
        exact = ExactSymbol(lambda xi: _eval(np.zeros(1), xi)[0])
    return PolyhomSymbol(deg, data, exact)


def _is_zero_coef(c) -> bool:
    if isinstance(c, PeriodicMatrixFunction):
        return not np.any(c.samples)
    return not np.any(np.asarray(c))


def _coef_samples(c) -> np.ndarray:
    if isinstance(c, PeriodicMatrixFunction):
        return c.samples
    return np.atleast_2d(np.asarray(c, dtype=complex))[None]


def symbol_from_components(order, components, exact: ExactSymbol | None = None, depth: int | None = None) -> PolyhomSymbol:
    """Build a classical symbol from ``[(plus, minus), ...]`` component values.

    Values may be scalars, matrices or grid samples of shape (g, m, m).
    """
    comps = list(components)
    depth = len(comps) if depth is None else depth
    arrays = []
    for plus, minus in comps:
        arrays.append((_value_samples(plus), _value_samples(minus)))
    m = arrays[0][0].shape[-1]
    g = max(max(p.shape[0], q.shape[0]) for p, q in arrays)
    data = np.zeros((depth, 1, 2, g, m, m), dtype=complex)
    for j, (p, q) in enumerate(arrays[:depth]):
        data[j, 0, 0] = p
        data[j, 0, 1] = q
    return PolyhomSymbol(order, data, exact)


def _value_samples(v) -> np.ndarray:
    if isinstance(v, PeriodicMatrixFunction):
        return v.samples
    arr = np.asarray(v, dtype=complex)
    if arr.ndim == 3:
        return arr
    return np.atleast_2d(arr)[None]


def log_xi_symbol(rank: int = 1, depth: int = DEFAULT_DEPTH) -> LogPolyhomSymbol:
    """The symbol ``log|xi| * I`` (log type 1, order 0)."""
    data = np.zeros((depth, 2, 2, 1, rank, rank), dtype=complex)
    data[0, 1, :, 0] = np.eye(rank)
    return LogPolyhomSymbol(0, data)


# ---------------------------------------------------------------------------
# derivatives in xi and x


def _xi_derivative_data(data: np.ndarray, order: complex, shift: int) -> np.ndarray:
    """One xi-derivative of components whose level-j degree is ``order - j - shift``.

    d/dxi (|xi|^d log^l|xi|) = sgn(xi) |xi|^(d-1) (d log^l + l log^(l-1)).
    """
    depth, K = data.shape[:2]
    out = np.empty_like(data)
    sgn = SIDES.reshape(1, 2, 1, 1, 1)
    for j in range(depth):
        d = order - j - shift
        cur = d * data[j]
        if K > 1:
            lfac = np.arange(1, K).reshape(-1, 1, 1, 1, 1)
            cur[:-1] = cur[:-1] + lfac * data[j, 1:]
        out[j] = sgn * cur
    return out


def xi_derivatives(sym: LogPolyhomSymbol, count: int) -> list[np.ndarray]:
    """``[d_xi^alpha data for alpha < count]``; level j of entry alpha has degree a-j-alpha."""
    out = [sym.data]
    for alpha in range(1, count):
        out.append(_xi_derivative_data(out[-1], sym.order, alpha - 1))
    return out


def x_derivatives(sym: LogPolyhomSymbol, count: int) -> list[np.ndarray]:
    return [x_derivative(sym.data, alpha, axis=3) for alpha in range(count)]


# ---------------------------------------------------------------------------
# star product


def _check_pair(s: LogPolyhomSymbol, t: LogPolyhomSymbol):
    if s.rank != t.rank:
        raise SymbolError(f"rank mismatch: {s.rank} vs {t.rank}")
    if s.grid_size != t.grid_size and 1 not in (s.grid_size, t.grid_size):
        raise SymbolError(f"grid mismatch: {s.grid_size} vs {t.grid_size}")


def star_product(sigma: LogPolyhomSymbol, tau: LogPolyhomSymbol, depth: int | None = None) -> LogPolyhomSymbol:
    """Composition symbol ``sum_alpha (-i)^alpha/alpha! d_xi^alpha sigma d_x^alpha tau``."""
    _check_pair(sigma, tau)
    available = min(sigma.depth, tau.depth)
    depth = available if depth is None else depth
    if depth < 1:
        raise SymbolError("depth must be at least 1")
    if depth > available:
        raise DepthError(depth, available)
    x_const = tau.grid_size == 1
    nalpha = 1 if x_const else depth
    dxi = xi_derivatives(sigma, nalpha)
    dx = x_derivatives(tau, nalpha)
    K1, K2 = sigma.log_type + 1, tau.log_type + 1
    g = max(sigma.grid_size, tau.grid_size)
    m = sigma.rank
    out = np.zeros((depth, K1 + K2 - 1, 2, g, m, m), dtype=complex)
    for alpha in range(nalpha):
        coef = (-1j) ** alpha / math.factorial(alpha)
        S, T = dxi[alpha], dx[alpha]
        for j1 in range(depth - alpha):
            for j2 in range(depth - alpha - j1):
                J = alpha + j1 + j2
                for l1 in range(K1):
                    a = S[j1, l1]
                    if not a.any():
                        continue
                    for l2 in range(K2):
                        b = T[j2, l2]
                        if not b.any():
                            continue
                        out[J, l1 + l2] += coef * (a @ b)
    # with an x-independent right factor the composition symbol is the pointwise product
    exact = None
    if sigma.exact is not None and tau.exact is not None and not tau.exact.x_dependent:
        exact = sigma.exact.pointwise(tau.exact, np.matmul)
    return make_symbol(sigma.order + tau.order, out, exact, sigma.cutoff, keep_log=K1 + K2 > 2)


def star_power(sigma: LogPolyhomSymbol, k: int, depth: int | None = None) -> LogPolyhomSymbol:
    if k < 0:
        raise SymbolError("negative star powers need inverse_symbol")
    depth = sigma.depth if depth is None else depth
    if k == 0:
        return identity_symbol(sigma.rank, depth)
    out = sigma.truncate(depth)
    for _ in range(k - 1):
        out = star_product(out, sigma, depth)
    return out


def commutator_symbol(sigma: LogPolyhomSymbol, tau: LogPolyhomSymbol, depth: int | None = None) -> LogPolyhomSymbol:
    return star_product(sigma, tau, depth) - star_product(tau, sigma, depth)


# ---------------------------------------------------------------------------
# inversion


def _leading_inverse(lead: np.ndarray) -> np.ndarray:
    """Invert (..., 2, g, m, m) leading values, reporting singular points."""
    sv = np.linalg.svd(lead, compute_uv=False)
    smin = sv[..., -1]
    if np.min(smin) <= 1e-10:
        idx = np.unravel_index(np.argmin(smin), smin.shape)
        raise SingularSymbolError(int(idx[-1]), int(idx[-2]), float(smin[idx]))
    return batch_inverse(lead)


def parametrix_recursion(
    dxi: list[np.ndarray], lead_inv: np.ndarray, depth: int, x_const: bool
) -> list[np.ndarray]:
    """Solve ``sigma * b ~ I`` level by level.

    ``dxi[alpha][k]`` holds d_xi^alpha of the level-k component (classical,
    arrays of shape (2, g, ..., m, m)); ``lead_inv`` inverts the (possibly
    shifted) leading level and may carry extra batch axes after the grid
    axis.  Returns ``b_j`` arrays with the batch shape of ``lead_inv``.
    """
    b = [lead_inv]
    extra = lead_inv.ndim - 4
    cache: dict[tuple[int, int], np.ndarray] = {}

    def dxb(l, alpha):
        key = (l, alpha)
        if key not in cache:
            cache[key] = x_derivative(b[l], alpha, axis=1)
        return cache[key]

    def expand(arr):
        return arr.reshape(arr.shape[:2] + (1,) * extra + arr.shape[2:])

    for j in range(1, depth):
        acc = np.zeros_like(lead_inv)
        for alpha in range(0, j + 1):
            if alpha and x_const:
                break
            coef = (-1j) ** alpha / math.factorial(alpha)
            for k in range(0, j - alpha + 1):
                l = j - alpha - k
                if l == j:
                    continue
                s = dxi[alpha][k]
                if not s.any():
                    continue
                acc = acc + coef * (expand(s) @ dxb(l, alpha))
        b.append(-(lead_inv @ acc))
    return b


def inverse_symbol(sigma: PolyhomSymbol, depth: int | None = None) -> PolyhomSymbol:
    """Right parametrix symbol of order ``-a`` (also a left inverse to the truncation depth)."""
    if sigma.log_type:
        raise SymbolError("inverse_symbol expects a classical symbol")
    depth = sigma.depth if depth is None else depth
    if depth > sigma.depth:
        raise DepthError(depth, sigma.depth)
    x_const = sigma.grid_size == 1
    dxi = [d[:, 0] for d in xi_derivatives(sigma, 1 if x_const else depth)]
    lead_inv = _leading_inverse(sigma.data[0, 0])
    b = parametrix_recursion(dxi, lead_inv, depth, x_const)
    data = np.stack(b)[:, None]
    exact = None
    if sigma.exact is not None and not sigma.exact.x_dependent:
        e = sigma.exact
        exact = ExactSymbol(lambda xi: batch_inverse(e.fn(xi)))
    return PolyhomSymbol(-sigma.order, data, exact, sigma.cutoff)


# ---------------------------------------------------------------------------
# evaluation


def homog_eval(sym: LogPolyhomSymbol, x_index: int, xi, use_exact: bool = True) -> np.ndarray:
    """Evaluate ``sum chi(xi) sigma_{a-j,l}(x, xi) log^l|xi|`` at grid point ``x_index``.

    Returns an array of shape ``(len(xi), m, m)`` (or ``(m, m)`` for scalar xi).
    The exact evaluator is used for ``|xi| >= 1`` when present.
    """
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = truncated_sum(sym, xi)[min(x_index, sym.grid_size - 1)]
    if use_exact and sym.exact is not None:
        far = np.abs(xi) >= 1.0
        if far.any():
            xg = grid_points(sym.grid_size)[x_index: x_index + 1]
            vals = sym.exact(xi[far], xg)[0]
            out[far] = vals
    return out[0] if scalar else out


def truncated_sum(sym: LogPolyhomSymbol, xi: np.ndarray, cutoff: Cutoff | None = None) -> np.ndarray:
    """``sum_j chi(xi) sigma_{a-j}(x, xi)`` on every grid point: shape (g, n, m, m)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    chi = (sym.cutoff if cutoff is None else cutoff)(xi)
    g, m = sym.grid_size, sym.rank
    out = np.zeros((g, len(xi), m, m), dtype=complex)
    nz = chi > 0
    if not nz.any():
        return out
    xs = xi[nz]
    axs = np.abs(xs)
    side = (xs < 0).astype(int)
    logs = np.log(axs)
    acc = np.zeros((g, len(xs), m, m), dtype=complex)
    for j in range(sym.depth):
        d = sym.degree(j)
        pw = axs ** d
        for l in range(sym.log_type + 1):
            vals = sym.data[j, l][side]  # (n, g, m, m)
            if not vals.any():
                continue
            w = pw * logs**l
            acc += np.moveaxis(vals, 1, 0) * w[None, :, None, None]
    out[:, nz] = acc * chi[nz][None, :, None, None]
    return out


# ---------------------------------------------------------------------------
# serialization


def symbol_to_json(sym: LogPolyhomSymbol) -> dict:
    """Component data as nested lists (the exact evaluator is not serialized)."""
    order = complex(sym.order)
    return {
        "order": [order.real, order.imag],
        "depth": sym.depth,
        "log_type": sym.log_type,
        "grid": sym.grid_size,
        "rank": sym.rank,
        "cutoff": [sym.cutoff.lower, sym.cutoff.upper],
        "re": sym.data.real.tolist(),
        "im": sym.data.imag.tolist(),
    }


def symbol_from_json(obj: dict) -> LogPolyhomSymbol:
    data = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    order = complex(*obj["order"])
    return make_symbol(_real_if_close(order), data, None, Cutoff(*obj["cutoff"]), keep_log=True)
