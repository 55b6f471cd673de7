"""Exact spectral quantities of Fourier multipliers on the circle.

A multiplier acts on the mode ``e^{inx}`` by a matrix ``sigma(n)``.  Zeta
functions are continued analytically by summing modes ``|n| <= M``
directly and replacing the rest by the large-``n`` expansion of the
summand, each power summed in closed form with the Hurwitz zeta function.
The expansion coefficients are fitted from samples of the closed-form mode
map at large (non-integer) ``n``, so nothing here goes through the symbol
calculus or contour integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import mpmath as mp
import numpy as np

from .holo import AdmissibilityError, SpectralCut, _as_cut
from .symbols import PolyhomSymbol, SymbolError, homog_eval
from .traces import FitError, LaurentFit, laurent_coefficients

DEFAULT_MODES = 4096
DEFAULT_TERMS = 6
POLE_GUARD = 1e-3
DERIVATIVE_STEP = 1e-2
CONDITION_LIMIT = 1e8


class PoleError(SymbolError):
    """Zeta requested too close to one of its poles."""


class TailError(SymbolError):
    """The large-mode expansion did not reproduce the summand."""


@dataclass(frozen=True)
class ZetaResult:
    value: complex
    error_estimate: float
    direct: complex
    tail: complex
    winding: int = 0

    def to_json(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "error_estimate": self.error_estimate,
            "direct": [self.direct.real, self.direct.imag],
            "tail": [self.tail.real, self.tail.imag],
            "winding": self.winding,
        }


def _pairwise_sum(values: np.ndarray) -> complex:
    # numpy's add.reduce is pairwise along a contiguous axis: deterministic order
    return complex(np.add.reduce(np.ascontiguousarray(values).ravel()))


class MultiplierOperator:
    """Operator acting on mode ``n`` by ``mode_map(n)`` (an ``(N, m, m)`` array for ``N`` modes).

    ``mode_map`` must be analytic in ``n`` for large ``|n|``: the tail
    expansion samples it at non-integer points.  ``log_type`` is the highest
    power of ``log n`` in its large-``n`` expansion.
    """

    def __init__(
        self,
        mode_map: Callable[[np.ndarray], np.ndarray],
        order: complex,
        cut=None,
        symbol: PolyhomSymbol | None = None,
        log_type: int = 0,
        name: str = "",
    ):
        self._map = mode_map
        self.order = complex(order)
        self.cut = _as_cut(cut)
        self.symbol = symbol
        self.log_type = log_type
        self.name = name

    def __call__(self, n) -> np.ndarray:
        n = np.atleast_1d(np.asarray(n, dtype=float))
        vals = np.asarray(self._map(n), dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        return vals

    @cached_property
    def rank(self) -> int:
        return self(np.array([1.0])).shape[-1]

    def __matmul__(self, other: "MultiplierOperator") -> "MultiplierOperator":
        sym = None
        if self.symbol is not None and other.symbol is not None:
            from .symbols import star_product

            sym = star_product(self.symbol, other.symbol)
        return MultiplierOperator(
            lambda n: self(n) @ other(n),
            self.order + other.order,
            cut=self.cut,
            symbol=sym,
            log_type=self.log_type + other.log_type,
            name=f"({self.name})({other.name})",
        )

    def with_cut(self, cut) -> "MultiplierOperator":
        return MultiplierOperator(self._map, self.order, cut, self.symbol, self.log_type, self.name)

    def eigenvalues(self, n) -> np.ndarray:
        vals = self(n)
        if vals.shape[-1] == 1:
            return vals[..., 0]
        return np.linalg.eigvals(vals)

    def check_admissible(self, max_mode: int = 1024, tol: float = 1e-10):
        n = np.arange(-max_mode, max_mode + 1, dtype=float)
        eig = self.eigenvalues(n)
        dist = self.cut.ray_distance(eig)
        k = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[k] <= tol * max(1.0, abs(eig[k])):
            raise AdmissibilityError(
                f"{self.name or 'operator'}: eigenvalue {complex(eig[k]):.6g} of mode n={int(n[k[0]])} "
                f"lies on the cut ray at angle {self.cut.angle:.6g}"
            )

    def symbol_mismatch(self, modes=(32, 48, 64, 96, 128)) -> np.ndarray:
        """``max |sigma(n) - symbol(n)|`` per sample mode (both signs)."""
        if self.symbol is None:
            raise SymbolError("operator has no symbol attached")
        n = np.asarray(modes, dtype=float)
        n = np.concatenate([n, -n])
        approx = homog_eval(self.symbol, 0, n, use_exact=False)
        return np.max(np.abs(self(n) - approx), axis=(-2, -1))


def multiplier_from_symbol(sym: PolyhomSymbol, cut=None, name: str = "") -> MultiplierOperator:
    """Wrap an ``x``-independent symbol with an exact evaluator as a multiplier."""
    if sym.exact is None or sym.grid_size != 1:
        raise SymbolError("a multiplier needs an x-independent symbol with an exact evaluator")
    return MultiplierOperator(lambda n: sym.exact(n)[0], sym.order, cut, sym, sym.log_type, name)


# ---------------------------------------------------------------------------
# per-mode matrix functions (eigendecomposition with a Schur fallback)


def _parlett(t: np.ndarray, f: Callable, df: Callable) -> np.ndarray:
    """``f`` of a batch of upper-triangular matrices by Parlett's recurrence."""
    m = t.shape[-1]
    d = np.diagonal(t, axis1=-2, axis2=-1)
    out = np.zeros_like(t)
    for i in range(m):
        out[..., i, i] = f(d[..., i])
    for p in range(1, m):
        for i in range(m - p):
            j = i + p
            li, lj = d[..., i], d[..., j]
            s = t[..., i, j] * (out[..., j, j] - out[..., i, i])
            for k in range(i + 1, j):
                s = s + t[..., i, k] * out[..., k, j] - out[..., i, k] * t[..., k, j]
            close = np.abs(li - lj) <= 1e-8 * np.maximum(np.abs(li), 1.0)
            denom = np.where(close, 1.0, lj - li)
            out[..., i, j] = np.where(close, t[..., i, j] * df(li), s / denom)
    return out


class _ModeCalculus:
    """Cached spectral decompositions of ``sigma(n)`` used for ``f(sigma(n))``."""

    def __init__(self, values: np.ndarray):
        from scipy.linalg import schur

        self.values = values
        m = values.shape[-1]
        if m == 1:
            self.eig = values[..., 0, 0][..., None]
            self.vec = np.ones_like(values)
            self.inv = np.ones_like(values)
            self.schur = None
            return
        self.eig, self.vec = np.linalg.eig(values)
        cond = np.linalg.cond(self.vec)
        bad = ~np.isfinite(cond) | (cond > CONDITION_LIMIT)
        self.inv = np.zeros_like(self.vec)
        good = ~bad
        if good.any():
            self.inv[good] = np.linalg.inv(self.vec[good])
        self.schur = None
        if bad.any():
            idx = np.nonzero(bad)[0]
            ts, us = [], []
            for k in idx:
                tk, uk = schur(values[k], output="complex")
                ts.append(tk)
                us.append(uk)
            self.schur = (idx, np.array(ts), np.array(us))

    def trace_against(self, other: np.ndarray | None, f: Callable, df: Callable) -> np.ndarray:
        """``tr(other @ f(sigma))`` per mode (``other=None`` means the identity)."""
        fe = f(self.eig)
        if other is None:
            out = np.sum(fe, axis=-1)
        else:
            proj = np.einsum("nij,njk,nki->ni", self.inv, other, self.vec)
            out = np.sum(proj * fe, axis=-1)
        if self.schur is not None:
            idx, t, u = self.schur
            ft = _parlett(t, f, df)
            fm = u @ ft @ np.conj(np.swapaxes(u, -1, -2))
            out = out.copy()
            out[idx] = np.trace(fm if other is None else other[idx] @ fm, axis1=-2, axis2=-1)
        return out

    def apply(self, f: Callable, df: Callable) -> np.ndarray:
        """``f(sigma(n))`` per mode."""
        out = self.vec @ (f(self.eig)[..., None] * self.inv)
        if self.values.shape[-1] == 1:
            return f(self.values)
        if self.schur is not None:
            idx, t, u = self.schur
            out[idx] = u @ _parlett(t, f, df) @ np.conj(np.swapaxes(u, -1, -2))
        return out


def log_multiplier(op: MultiplierOperator, name: str = "") -> MultiplierOperator:
    """``log sigma(n)`` with the operator's cut, as a log-type multiplier of order 0."""
    cut = op.cut

    def mode_map(n):
        calc = _ModeCalculus(op(n))
        return calc.apply(cut.log, lambda lam: 1.0 / lam)

    return MultiplierOperator(mode_map, 0.0, cut, None, op.log_type + 1, name or f"log {op.name}")


def power_multiplier(op: MultiplierOperator, z: complex, name: str = "") -> MultiplierOperator:
    """``sigma(n)^z`` with the operator's cut."""
    cut = op.cut
    z = complex(z)

    def mode_map(n):
        calc = _ModeCalculus(op(n))
        return calc.apply(lambda lam: cut.power(lam, z), lambda lam: z * cut.power(lam, z - 1))

    return MultiplierOperator(mode_map, z * op.order, cut, None, op.log_type, name or f"{op.name}^{z}")


# ---------------------------------------------------------------------------
# subtracted-tail continuation


def _tail_nodes(modes: int, count: int) -> np.ndarray:
    """Chebyshev points in ``u = M t`` on ``(0, 1]`` (``t = 1/n``)."""
    k = np.arange(count)
    return 0.5 * (1.0 + np.cos((2 * k + 1) * np.pi / (2 * count)))


def _hurwitz(w: complex, start: int, l: int) -> complex:
    """``sum_{n >= start} n^{-w} log^l n``."""
    with mp.workdps(25):
        return complex((-1) ** l * mp.zeta(mp.mpc(w.real, w.imag), start, l))


@dataclass
class _TailSampler:
    """Values of a summand ``f(n)`` on both sides at the fitting nodes."""

    modes: int
    terms: int
    log_type: int
    u: np.ndarray = field(init=False)
    n: np.ndarray = field(init=False)

    def __post_init__(self):
        count = 2 * self.terms * (self.log_type + 1) + 6
        self.u = _tail_nodes(self.modes, count)
        self.n = self.modes / self.u


def _fit_coefficients(u: np.ndarray, g: np.ndarray, modes: int, terms: int, log_type: int = 0):
    """Least-squares ``g ~ sum c_{jl} n^{-j} log^l n`` on the nodes; returns ``{(j, l): c}`` and the residual."""
    logn = np.log(modes / u)
    lmax = logn.max()
    cols, keys = [], []
    for j in range(terms):
        for l in range(log_type + 1):
            cols.append(u**j * (logn / lmax) ** l)
            keys.append((j, l))
    basis = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(basis, g, rcond=None)
    resid = float(np.max(np.abs(basis @ coef - g)))
    return {k: c * modes ** k[0] / lmax ** k[1] for k, c in zip(keys, coef)}, resid


def _fit_tail(u: np.ndarray, values: np.ndarray, modes: int, w: complex, terms: int, log_type: int):
    """Tail ``sum_{n > M}`` from samples ``values = f(M/u)`` of ``f(n) ~ n^{-w} sum c_{jl} n^{-j} log^l n``."""
    g = values * np.exp(w * np.log(modes / u))  # f(n) n^w
    coef, resid = _fit_coefficients(u, g, modes, terms, log_type)
    tail = 0.0j
    for (j, l), c in coef.items():
        if c != 0:
            tail += c * _hurwitz(w + j, modes + 1, l)
    return tail, resid, coef


def _regularized_sum(
    direct_vals: np.ndarray,
    tail_vals: dict,
    u: np.ndarray,
    modes: int,
    w: complex,
    terms: int,
    log_type: int,
):
    direct = _pairwise_sum(direct_vals)
    tail = 0.0j
    err = 0.0
    scale = modes ** max(1.0 - w.real, 0.0)
    for side in (1.0, -1.0):
        t_j, res_j, _ = _fit_tail(u, tail_vals[side], modes, w, terms, log_type)
        t_k, _, _ = _fit_tail(u, tail_vals[side], modes, w, terms + 1, log_type)
        tail += t_j
        err += abs(t_j - t_k) + res_j * scale
    return direct + tail, direct, tail, err


class _ZetaEngine:
    """Everything ``zeta(A, s)`` needs for one operator, computed once."""

    def __init__(self, op: MultiplierOperator, modes: int, terms: int):
        self.op, self.modes, self.terms = op, modes, terms
        cut = op.cut
        n = np.arange(-modes, modes + 1, dtype=float)
        eig = op.eigenvalues(n)
        dist = cut.ray_distance(eig)
        k = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[k] <= 1e-12 * max(1.0, abs(eig[k])):
            raise AdmissibilityError(
                f"{op.name or 'operator'}: eigenvalue {complex(eig[k]):.6g} of mode n={int(n[k[0]])} "
                f"on the cut ray at angle {cut.angle:.6g}"
            )
        self.direct_logs = cut.log(eig)
        principal = np.log(eig.astype(complex))
        self.winding = int(np.rint(np.sum((self.direct_logs - principal).imag) / (2 * np.pi)))
        self.sampler = _TailSampler(modes, terms, op.log_type)
        self.tail_logs = {s: cut.log(op.eigenvalues(s * self.sampler.n)) for s in (1.0, -1.0)}

    def zeta(self, s: complex) -> ZetaResult:
        s = complex(s)
        direct_vals = np.exp(-s * self.direct_logs)
        tail_vals = {k: np.sum(np.exp(-s * v), axis=-1) for k, v in self.tail_logs.items()}
        w = s * self.op.order
        value, direct, tail, err = _regularized_sum(
            direct_vals, tail_vals, self.sampler.u, self.modes, w, self.terms, self.op.log_type
        )
        return ZetaResult(value, err, direct, tail, self.winding)


    def _log_expansions(self, terms: int):
        """Coefficients of ``sum_i mu_i`` and ``sum_i mu_i^2`` in powers of ``1/n``, ``mu_i = log lambda_i - a log n``."""
        u = self.sampler.u
        loga = self.op.order * np.log(self.sampler.n)[:, None]
        out = {}
        for side, logs in self.tail_logs.items():
            mu = logs - loga
            e, r1 = _fit_coefficients(u, np.sum(mu, axis=-1), self.modes, terms)
            k, r2 = _fit_coefficients(u, np.sum(mu**2, axis=-1), self.modes, terms)
            out[side] = (e, k, max(r1, r2))
        return out

    def value_at_zero(self, terms: int) -> tuple[complex, float]:
        a = self.op.order
        vals = []
        for e, _, resid in self._log_expansions(terms).values():
            vals.append(-e[(1, 0)] / a)
        return complex(sum(vals)), 0.0

    def derivative_at_zero(self, terms: int) -> complex:
        """``zeta'(0)``: the s-derivative of the subtracted-tail continuation, taken in closed form."""
        a = self.op.order
        m = self.direct_logs.shape[-1]
        M1 = self.modes + 1
        with mp.workdps(25):
            zh0 = complex(mp.zeta(0, M1))
            zh0p = complex(mp.zeta(0, M1, 1))
            psi = complex(mp.digamma(M1))
            zh = [complex(mp.zeta(j, M1)) if j >= 2 else 0.0 for j in range(terms)]
        value = -_pairwise_sum(self.direct_logs)
        for e, k, _ in self._log_expansions(terms).values():
            value += -e[(0, 0)] * zh0 + m * a * zh0p
            value += e[(1, 0)] * psi + k[(1, 0)] / (2 * a)
            value -= sum(e[(j, 0)] * zh[j] for j in range(2, terms))
        return complex(value)


_ENGINES: dict = {}


def _engine(op: MultiplierOperator, modes: int, terms: int) -> _ZetaEngine:
    key = (id(op), op.cut.angle, modes, terms)
    eng = _ENGINES.get(key)
    if eng is None or eng.op is not op:
        if len(_ENGINES) > 32:
            _ENGINES.clear()
        eng = _ENGINES[key] = _ZetaEngine(op, modes, terms)
    return eng


def zeta_poles(op: MultiplierOperator, count: int = 12) -> list[complex]:
    """Candidate poles ``(1 - j)/a`` (``s = 0`` excluded, it is always regular)."""
    return [(1 - j) / op.order for j in range(count) if j != 1]


def zeta(
    op: MultiplierOperator,
    s: complex,
    modes: int = DEFAULT_MODES,
    terms: int = DEFAULT_TERMS,
    tol: float | None = None,
) -> ZetaResult:
    """``sum_n tr sigma(n)^{-s}``, continued past the convergence half-plane."""
    s = complex(s)
    if s == 0:
        return zeta_at_zero(op, modes, terms)
    for p in zeta_poles(op, terms + 2):
        if abs(s - p) < POLE_GUARD:
            raise PoleError(f"s = {s} is within {POLE_GUARD} of the pole {p}")
    res = _engine(op, modes, terms).zeta(s)
    if tol is not None and res.error_estimate > tol:
        raise TailError(f"tail error estimate {res.error_estimate:.3e} exceeds {tol:.1e}")
    return res


def _richardson(f: Callable[[float], complex], h: float, levels: int = 3) -> tuple[complex, float]:
    """Extrapolate an even-in-``h`` approximation ``f(h)`` to ``h = 0``."""
    table = [[f(h / 2**k)] for k in range(levels)]
    for j in range(1, levels):
        fac = 4.0**j
        for k in range(j, levels):
            table[k].append((fac * table[k][j - 1] - table[k - 1][j - 1]) / (fac - 1))
    best = table[-1][-1]
    return best, abs(best - table[-1][-2])


def zeta_at_zero(op: MultiplierOperator, modes: int = DEFAULT_MODES, terms: int = DEFAULT_TERMS) -> ZetaResult:
    """``zeta(0) = -(e_1^+ + e_1^-)/a`` with ``e_1^{+-}`` the ``1/n`` coefficients of ``log det sigma(+-n)``.

    The direct sum and the ``n^0`` tail cancel identically at ``s = 0``.
    """
    eng = _engine(op, modes, terms)
    value, _ = eng.value_at_zero(terms)
    other, _ = eng.value_at_zero(terms + 1)
    m = eng.direct_logs.shape[-1]
    direct = complex(m * (2 * modes + 1))
    return ZetaResult(value, abs(value - other), direct, value - direct, eng.winding)


def zeta_prime_zero(
    op: MultiplierOperator,
    modes: int = DEFAULT_MODES,
    terms: int = DEFAULT_TERMS,
    step: float | None = None,
) -> complex:
    """``zeta'(0)``.

    By default the continuation is differentiated in closed form.  With
    ``step`` set, a Richardson-extrapolated centred difference of ``zeta``
    at ``+-step`` is used instead.
    """
    eng = _engine(op, modes, terms)
    if step is None:
        if op.log_type:
            raise SymbolError("closed-form zeta'(0) needs a classical multiplier; pass a step")
        return eng.derivative_at_zero(terms)
    value, _ = _richardson(lambda h: (eng.zeta(h).value - eng.zeta(-h).value) / (2 * h), step)
    return value


def pole_residue(op: MultiplierOperator, pole: complex, modes: int = DEFAULT_MODES, terms: int = DEFAULT_TERMS) -> complex:
    """Residue of zeta at a simple pole, from ``(s - p) zeta(s)`` at ``s = p +- h``."""
    eng = _engine(op, modes, terms)
    pole = complex(pole)

    def sym(h):
        return 0.5 * h * (eng.zeta(pole + h).value - eng.zeta(pole - h).value)

    value, _ = _richardson(sym, DERIVATIVE_STEP)
    return value


def log_det_spectral(op: MultiplierOperator, modes: int = DEFAULT_MODES, terms: int = DEFAULT_TERMS) -> complex:
    return -zeta_prime_zero(op, modes, terms)


def det_zeta_spectral(op: MultiplierOperator, modes: int = DEFAULT_MODES, terms: int = DEFAULT_TERMS) -> complex:
    return complex(np.exp(log_det_spectral(op, modes, terms)))


def anomaly_spectral(
    a: MultiplierOperator,
    b: MultiplierOperator,
    cut_ab=None,
    modes: int = DEFAULT_MODES,
    terms: int = DEFAULT_TERMS,
) -> complex:
    """``log det(AB) - log det(A) - log det(B)`` from mode sums (no reduction mod 2 pi i)."""
    ab = (a @ b).with_cut(a.cut if cut_ab is None else cut_ab)
    return (
        log_det_spectral(ab, modes, terms)
        - log_det_spectral(a, modes, terms)
        - log_det_spectral(b, modes, terms)
    )


# ---------------------------------------------------------------------------
# weighted traces of multipliers


def weighted_trace_spectral(
    a: MultiplierOperator,
    q: MultiplierOperator,
    step: float | None = None,
    pairs: int = 6,
    modes: int = DEFAULT_MODES,
    terms: int = DEFAULT_TERMS,
    fit_tol: float = 1e-6,
) -> LaurentFit:
    """Finite part at ``z = 0`` of ``sum_n tr(sigma_A(n) sigma_Q(n)^{-z})``."""
    qo = q.order.real
    if qo <= 0:
        raise SymbolError("the weight must have positive order")
    h = 0.02 / qo if step is None else step
    cut = q.cut
    log_type = a.log_type + q.log_type
    sampler = _TailSampler(modes, terms, log_type)
    n = np.arange(-modes, modes + 1, dtype=float)
    grids = {"direct": n, 1.0: sampler.n, -1.0: -sampler.n}
    calcs = {k: _ModeCalculus(q(v)) for k, v in grids.items()}
    avals = {k: a(v) for k, v in grids.items()}

    def trace(zk: complex):
        f = lambda lam: cut.power(lam, -zk)
        df = lambda lam: -zk * cut.power(lam, -zk - 1)
        vals = {k: calcs[k].trace_against(avals[k], f, df) for k in grids}
        w = zk * q.order - a.order
        value, *_ = _regularized_sum(vals["direct"], {1.0: vals[1.0], -1.0: vals[-1.0]},
                                     sampler.u, modes, w, terms, log_type)
        return value

    z = h * np.arange(1, pairs + 1)
    fp = np.array([trace(zk) for zk in z])
    fm = np.array([trace(-zk) for zk in z])
    c0, c1, c2, resid = laurent_coefficients(z, fp, fm, log_type > 0)
    scale = max(1.0, float(np.max(np.abs(fp + fm))))
    if resid > fit_tol * scale:
        raise FitError(f"Laurent fit residual {resid:.3e} exceeds tolerance")
    return LaurentFit(complex(c0), complex(c1), complex(c2), tuple(np.concatenate([z, -z])),
                      tuple(np.concatenate([fp, fm])), float(resid))


def canonical_trace_spectral(a: MultiplierOperator, modes: int = DEFAULT_MODES, terms: int = DEFAULT_TERMS) -> complex:
    """Regularized ``sum_n tr sigma(n)`` for non-integer order (no pole at ``w = -a``)."""
    sampler = _TailSampler(modes, terms, a.log_type)
    n = np.arange(-modes, modes + 1, dtype=float)
    direct = np.trace(a(n), axis1=-2, axis2=-1)
    tails = {s: np.trace(a(s * sampler.n), axis1=-2, axis2=-1) for s in (1.0, -1.0)}
    value, *_ = _regularized_sum(direct, tails, sampler.u, modes, -a.order, terms, a.log_type)
    return value
