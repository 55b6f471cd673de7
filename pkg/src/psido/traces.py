"""Residues, cut-off integrals, canonical and weighted traces.

Two flavours of canonical trace are provided.  The chart-local one
integrates the cut-off density ``TR_x`` over the circle.  The periodized
one (the default) is the trace of the operator acting on Fourier modes: a
zeta-regularized lattice sum

    sum_{n != 0} r_N(x, n) + sigma(x, 0) + sum_{j, l, +-} tr sigma_{a-j,l}(x, +-1) Z(a-j, l)

with ``Z(d, l) = (-1)^l zeta^{(l)}(-d)`` and ``Z(-1, l)`` the Stieltjes
constant ``gamma_l``.  On the circle the two differ by the trace of the
smoothing operator coming from periodization, so only the lattice sum
reproduces mode sums and zeta determinants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np

from .holo import SpectralCut, _as_cut, complex_power_symbol, gauss_legendre, log_symbol
from .symbols import (
    Cutoff,
    LogPolyhomSymbol,
    PolyhomSymbol,
    SymbolError,
    commutator_symbol,
    grid_points,
    star_product,
)

TWO_PI = 2.0 * np.pi
DEFAULT_LAMBDA = 1.0e3
mp.mp.dps = 30


class ResidueObstruction(SymbolError):
    """Integer-order symbol with a non-vanishing degree -1 trace."""


class FitError(SymbolError):
    """The Laurent fit of a weighted trace did not reproduce its samples."""


@dataclass(frozen=True, eq=False)
class DensityReport:
    """A density on the circle sampled on the symbol grid."""

    x_grid: np.ndarray
    values: np.ndarray
    analytic_part: complex = 0.0
    numeric_part: complex = 0.0
    error_estimate: float = 0.0

    @property
    def integral(self) -> complex:
        return complex(TWO_PI * np.mean(self.values))

    def to_json(self) -> dict:
        return {
            "x_grid": self.x_grid.tolist(),
            "values_re": self.values.real.tolist(),
            "values_im": self.values.imag.tolist(),
            "integral": self.integral,
            "analytic_part": complex(self.analytic_part),
            "numeric_part": complex(self.numeric_part),
            "error_estimate": float(self.error_estimate),
        }


# ---------------------------------------------------------------------------
# zeta weights


@lru_cache(maxsize=4096)
def _zeta_weight_cached(re: float, im: float, l: int) -> complex:
    d = mp.mpc(re, im)
    if abs(d + 1) < 1e-9:
        return complex(mp.stieltjes(l))
    return complex((-1) ** l * mp.zeta(-d, 1, l))


def zeta_weight(d: complex, l: int) -> complex:
    """Regularized ``sum_{n >= 1} n^d log^l n``."""
    d = complex(d)
    return _zeta_weight_cached(round(d.real, 14), round(d.imag, 14), l)


def finite_part_tail(d: complex, l: int) -> complex:
    """``fp int_1^oo t^d log^l t dt`` (divergent powers and log R dropped)."""
    d = complex(d)
    if abs(d + 1) < 1e-9:
        return 0.0
    return (-1) ** (l + 1) * math.factorial(l) / (d + 1) ** (l + 1)


# ---------------------------------------------------------------------------
# residues


def _component_traces(sym: LogPolyhomSymbol) -> np.ndarray:
    """Traces of all component values: shape (depth, log_type+1, 2, g)."""
    return np.trace(sym.data, axis1=-2, axis2=-1)


def _minus_one_level(sym: LogPolyhomSymbol) -> int | None:
    j = sym.order + 1
    jr = round(j.real)
    if abs(j - jr) > 1e-9 or jr < 0:
        return None
    if jr >= sym.depth:
        raise SymbolError(
            f"depth {sym.depth} does not reach degree -1 for order {sym.order}; need depth >= {jr + 1}"
        )
    return jr


def residue_report(sym: LogPolyhomSymbol, log_index: int = 0) -> DensityReport:
    """Residue density ``(tr sigma_{-1,l}(x, +1) + tr sigma_{-1,l}(x, -1)) / 2 pi``."""
    g = sym.grid_size
    x = grid_points(g)
    j = _minus_one_level(sym)
    if j is None or log_index > sym.log_type:
        vals = np.zeros(g, dtype=complex)
    else:
        tr = _component_traces(sym)[j, log_index]
        vals = (tr[0] + tr[1]) / TWO_PI
    return DensityReport(x, vals, analytic_part=complex(TWO_PI * np.mean(vals)))


def residue(sym: LogPolyhomSymbol, log_index: int = 0) -> complex:
    """Noncommutative residue; only the degree -1, log-power ``log_index`` part contributes."""
    return residue_report(sym, log_index).integral


def _obstruction(sym: LogPolyhomSymbol) -> float:
    j = _minus_one_level(sym) if (sym.order + 1).real < sym.depth else None
    if j is None:
        return 0.0
    tr = _component_traces(sym)[j]
    return float(np.max(np.abs(tr[:, 0] + tr[:, 1])))


def check_obstruction(sym: LogPolyhomSymbol, tol: float = 1e-10):
    size = _obstruction(sym)
    if size > tol:
        raise ResidueObstruction(
            f"order {sym.order} symbol has a non-vanishing degree -1 trace ({size:.3e}); "
            "its canonical trace depends on the cut-off"
        )


# ---------------------------------------------------------------------------
# lattice (periodized) trace


def _component_sum(sym: LogPolyhomSymbol, xi: np.ndarray) -> np.ndarray:
    """Traced ``sum_{j,l} sigma_{a-j,l}(x, xi) log^l|xi|`` for ``|xi| >= 1``: shape (g, n)."""
    tr = _component_traces(sym)
    side = (xi < 0).astype(int)
    axs = np.abs(xi)
    logs = np.log(axs)
    out = np.zeros((sym.grid_size, xi.size), dtype=complex)
    for j in range(sym.depth):
        pw = axs ** sym.degree(j)
        for l in range(sym.log_type + 1):
            vals = tr[j, l][side]  # (n, g)
            if vals.any():
                out += vals.T * (pw * logs**l)[None]
    return out


def _exact_trace(sym: LogPolyhomSymbol, xi: np.ndarray) -> np.ndarray:
    """Traced exact symbol on the grid: shape (g, n)."""
    x = grid_points(sym.grid_size)
    vals = sym.exact(xi, x)
    tr = np.trace(vals, axis1=-2, axis2=-1)
    return np.broadcast_to(tr, (sym.grid_size, xi.size))


def _zeta_part(sym: LogPolyhomSymbol) -> np.ndarray:
    tr = _component_traces(sym)
    out = np.zeros(sym.grid_size, dtype=complex)
    for j in range(sym.depth):
        for l in range(sym.log_type + 1):
            t = tr[j, l, 0] + tr[j, l, 1]
            if np.any(t):
                out += t * zeta_weight(sym.degree(j), l)
    return out


def _remainder_decay(sym: LogPolyhomSymbol) -> float:
    return sym.depth - sym.order.real


def lattice_trace_density(sym: LogPolyhomSymbol, allow_obstruction: bool = False, max_modes: int = 1024) -> DensityReport:
    """Regularized ``sum_n tr sigma(x, n)`` on each grid point (periodized trace density).

    Without an exact evaluator the operator is taken to be the quantization
    of ``sum_j chi sigma_{a-j}``, whose values vanish at ``n = 0`` and whose
    remainder vanishes at every other integer.
    """
    if not allow_obstruction:
        check_obstruction(sym)
    x = grid_points(sym.grid_size)
    zpart = _zeta_part(sym)
    if sym.exact is None:
        return DensityReport(x, zpart / TWO_PI, analytic_part=complex(np.mean(zpart)))
    p = _remainder_decay(sym)
    total = _exact_trace(sym, np.zeros(1))[:, 0].astype(complex)
    m_lo, m_hi = 1, 32
    prev_last = None
    while True:
        n = np.arange(m_lo, m_hi + 1, dtype=float)
        last = 0.0
        floor = 0.0
        for s in (1.0, -1.0):
            xi = s * n
            ex = _exact_trace(sym, xi)
            r = ex - _component_sum(sym, xi)
            total = total + np.sum(r, axis=1)
            last = max(last, float(np.max(np.abs(r[:, -1]))))
            floor = max(floor, float(np.max(np.abs(ex[:, -1]))) * 1e-16)
        err = 2 * last * m_hi / max(p - 1.0, 1.0)
        # stop once the remainder is negligible, at the rounding floor, or no
        # longer decaying at its nominal rate (component mismatch dominates)
        small = err < 1e-14 * max(1.0, float(np.max(np.abs(total + zpart))))
        stalled = prev_last is not None and last > prev_last * 2.0 ** (-0.5 * p)
        if small or stalled or last < 64 * floor or m_hi >= max_modes:
            break
        prev_last = last
        m_lo, m_hi = m_hi + 1, 2 * m_hi
    vals = total + zpart
    return DensityReport(
        x,
        vals / TWO_PI,
        analytic_part=complex(np.mean(zpart)),
        numeric_part=complex(np.mean(total)),
        error_estimate=float(err),
    )


# ---------------------------------------------------------------------------
# chart-local cut-off integral


def _panels(a: float, b: float, count: int, n: int = 16):
    x, w = gauss_legendre(n)
    edges = np.linspace(a, b, count + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return ((lo + hi) * 0.5 + half * x).ravel(), (half * w).ravel()


def cutoff_trace_density(
    sym: LogPolyhomSymbol,
    cutoff_limit: float = DEFAULT_LAMBDA,
    allow_obstruction: bool = False,
) -> DensityReport:
    """``TR_x``: the finite part of ``int tr sigma(x, xi) dxi / 2 pi``.

    Homogeneous terms on ``|xi| >= 1`` integrate in closed form; the exact
    symbol on ``|xi| <= 1`` and the remainder on ``1 <= |xi| <= Lambda`` are
    integrated numerically, and the remainder beyond ``Lambda`` is estimated
    from its power decay.
    """
    if not allow_obstruction:
        check_obstruction(sym)
    g = sym.grid_size
    x = grid_points(g)
    tr = _component_traces(sym)
    analytic = np.zeros(g, dtype=complex)
    for j in range(sym.depth):
        for l in range(sym.log_type + 1):
            t = tr[j, l, 0] + tr[j, l, 1]
            if np.any(t):
                analytic += t * finite_part_tail(sym.degree(j), l)
    if sym.exact is None:
        # quantization of sum_j chi sigma_j: only the transition region is left
        xi, w = _panels(sym.cutoff.lower, sym.cutoff.upper, 4)
        chi = sym.cutoff(xi)
        numeric = np.zeros(g, dtype=complex)
        for s in (1.0, -1.0):
            vals = _component_sum(sym, s * xi)
            numeric += np.sum(vals * (chi * w)[None], axis=1)
        err = 0.0
    else:
        xi, w = _panels(-1.0, 1.0, 8)
        numeric = np.sum(_exact_trace(sym, xi) * w[None], axis=1)
        # dense panels near |xi| = 1, where exact symbols may still carry low-frequency features
        near = math.log(2.0)
        u0, w0 = _panels(0.0, near, 16)
        u1, w1 = _panels(near, math.log(cutoff_limit), max(8, int(2 * math.log(cutoff_limit))))
        u, wu = np.concatenate([u0, u1]), np.concatenate([w0, w1])
        t = np.exp(u)
        p = _remainder_decay(sym)
        err = 0.0
        for s in (1.0, -1.0):
            r = _exact_trace(sym, s * t) - _component_sum(sym, s * t)
            numeric = numeric + np.sum(r * (t * wu)[None], axis=1)
            r_end = _exact_trace(sym, np.array([s * cutoff_limit])) - _component_sum(sym, np.array([s * cutoff_limit]))
            tail = r_end[:, 0] * cutoff_limit / max(p - 1.0, 1.0)
            numeric = numeric + tail
            err += float(np.max(np.abs(tail)))
    vals = (analytic + numeric) / TWO_PI
    return DensityReport(x, vals, complex(np.mean(analytic)), complex(np.mean(numeric)), err)


# ---------------------------------------------------------------------------
# canonical and weighted traces


def canonical_trace(sym: LogPolyhomSymbol, periodize: bool = True, allow_obstruction: bool = False, **kwargs) -> complex:
    """Canonical trace ``TR``.

    ``periodize=True`` returns the trace of the operator on the circle
    (lattice sum); ``False`` returns the chart-local integral of ``TR_x``.
    """
    if periodize:
        return lattice_trace_density(sym, allow_obstruction).integral
    return cutoff_trace_density(sym, allow_obstruction=allow_obstruction, **kwargs).integral


def _weight_order(q_sym: LogPolyhomSymbol) -> complex:
    q = q_sym.order
    if q.real <= 0:
        raise SymbolError("weights need positive order")
    return q


def weighted_trace(sym: LogPolyhomSymbol, q_sym: PolyhomSymbol, cut=None, log_q: LogPolyhomSymbol | None = None) -> complex:
    """``tr^Q(A) = fp_{z=0} TR(A Q^{-z})`` through residues.

    For classical ``A`` this is ``TR(A) - res(A log Q)/q``.  Arguments of log
    type one produce a double pole; the finite part then reads
    ``TR(A) - 2 res(A log Q)/q + res_1(A log^2 Q)/(2 q^2)`` where ``res_1``
    picks the ``log|xi|`` coefficient at degree -1.
    """
    if sym.log_type > 1:
        raise SymbolError("weighted traces are implemented for log type <= 1")
    q = _weight_order(q_sym)
    lq = log_symbol(q_sym, _as_cut(cut)) if log_q is None else log_q
    tr = canonical_trace(sym, allow_obstruction=True)
    a_lq = star_product(sym, lq)
    if sym.log_type == 0:
        return tr - residue(a_lq) / q
    a_lq2 = star_product(a_lq, lq)
    return tr - 2.0 * residue(a_lq) / q + residue(a_lq2, log_index=1) / (2.0 * q * q)


@dataclass(frozen=True)
class LaurentFit:
    """Finite part and pole coefficients of ``z -> TR(A Q^{-z})`` at zero."""

    value: complex
    simple_pole: complex
    double_pole: complex
    z: tuple
    samples: tuple
    residual: float


def laurent_coefficients(z: np.ndarray, f_plus: np.ndarray, f_minus: np.ndarray, double_pole: bool):
    even = 0.5 * (f_plus + f_minus)
    odd = 0.5 * (f_plus - f_minus)
    powers = [0, 2, 4, 6] + ([-2] if double_pole else [])
    A = np.stack([z**p for p in powers], axis=1)
    coef_e, *_ = np.linalg.lstsq(A, even, rcond=None)
    res_e = np.max(np.abs(A @ coef_e - even))
    B = np.stack([z**p for p in (-1, 1, 3, 5)], axis=1)
    coef_o, *_ = np.linalg.lstsq(B, odd, rcond=None)
    res_o = np.max(np.abs(B @ coef_o - odd))
    c_m2 = coef_e[-1] if double_pole else 0.0
    return coef_e[0], coef_o[0], c_m2, max(res_e, res_o)


def weighted_trace_direct(
    sym: LogPolyhomSymbol,
    q_sym: PolyhomSymbol,
    cut=None,
    step: float | None = None,
    pairs: int = 6,
    fit_tol: float = 1e-6,
) -> LaurentFit:
    """Finite part at ``z = 0`` of the lattice trace of ``A Q^{-z}``.

    Samples ``z = +-k h`` (k = 1..pairs), fits the even part by
    ``c0 + c2 z^2 + ...`` (plus ``c_{-2}/z^2`` for log-type arguments) and the
    odd part by ``c_{-1}/z + c1 z + ...``.
    """
    q = _weight_order(q_sym)
    cut = _as_cut(cut)
    if step is None:
        # keep the samples well inside the disc free of the other poles, at orders k >= -1
        o = sym.order
        k = np.arange(-1, math.floor(o.real) + 3)
        gaps = np.abs(o - k)
        gaps = gaps[gaps > 1e-9]
        h = min(0.02, float(gaps.min()) / 40 if gaps.size else 0.02) / abs(q)
    else:
        h = step
    z = h * np.arange(1, pairs + 1)
    f = {}
    for sgn in (1.0, -1.0):
        vals = []
        for zk in sgn * z:
            qz = complex_power_symbol(q_sym, -zk, cut, sym.depth)
            vals.append(canonical_trace(star_product(sym, qz), allow_obstruction=True))
        f[sgn] = np.asarray(vals)
    c0, c1, c2, resid = laurent_coefficients(z, f[1.0], f[-1.0], sym.log_type > 0)
    scale = max(1.0, float(np.max(np.abs(f[1.0] + f[-1.0]))))
    if resid > fit_tol * scale:
        raise FitError(f"Laurent fit residual {resid:.3e} exceeds tolerance; samples {f}")
    return LaurentFit(complex(c0), complex(c1), complex(c2), tuple(np.concatenate([z, -z])),
                      tuple(np.concatenate([f[1.0], f[-1.0]])), float(resid))


@dataclass(frozen=True)
class CoboundaryReport:
    value: complex
    via_a: complex
    via_b: complex
    commutator_trace: complex


def weighted_trace_commutator(a_sym, b_sym, q_sym, cut=None, log_q=None) -> CoboundaryReport:
    """``tr^Q([A, B])`` from the residue expressions and from the weighted trace of the commutator."""
    q = _weight_order(q_sym)
    lq = log_symbol(q_sym, _as_cut(cut)) if log_q is None else log_q
    via_a = -residue(star_product(a_sym, commutator_symbol(b_sym, lq))) / q
    via_b = residue(star_product(b_sym, commutator_symbol(a_sym, lq))) / q
    comm = commutator_symbol(a_sym, b_sym)
    direct = weighted_trace(comm, q_sym, cut, log_q=lq)
    return CoboundaryReport(via_a, via_a, via_b, direct)
