"""Logarithms of products, weighted and zeta determinants, multiplicative anomalies.

For admissible ``A`` (order ``a``) and ``B`` (order ``b``):

* ``L(A, B) = log(AB) - log A - log B`` is classical of order 0 with zero residue;
* ``K(A, B) = log^2(AB)/(2(a+b)) - log^2 A/(2a) - log^2 B/(2b)``;
* ``W(tau) = d/dt|_0 L(A^t, A^tau B) = d/dt|_0 log(A^{tau+t} B) - log A``;
* ``log det_zeta(C) = TR(log C) - res(log^2 C)/(2c)``, so that
  ``log M(A, B) = TR(L) - res(K) = tr^Q(L) + res(L log Q)/q - res(K)`` for any weight ``Q``.

``tr^Q(L)`` has the local expression
``int_0^1 res(W(tau) (log(A^tau B)/(a tau + b) - log Q/q)) dtau``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .holo import SpectralCut, _as_cut, complex_power_symbol, gauss_legendre, log_symbol
from .operators import Operator
from .spectral import anomaly_spectral
from .symbols import LogPolyhomSymbol, PolyhomSymbol, SymbolError, star_product
from .traces import canonical_trace, residue, weighted_trace, weighted_trace_direct

DERIVATIVE_STEP = 1e-3
TAU_NODES = 16
MIN_GAP = math.radians(2.0)


class AnomalyError(SymbolError):
    """Inconsistent cuts or a failed internal consistency check."""


# ---------------------------------------------------------------------------
# cuts and logarithms


def _spectrum_sample(sym: LogPolyhomSymbol, modes: int) -> np.ndarray:
    lead = sym.data[0, 0].reshape(-1, sym.rank, sym.rank)
    eig = [np.linalg.eigvals(lead).ravel()]
    if sym.exact is not None:
        n = np.arange(-modes, modes + 1, dtype=float)
        x = np.linspace(0.0, 2 * np.pi, 8, endpoint=False) if sym.exact.x_dependent else None
        vals = sym.exact(n, x)
        eig.append(np.linalg.eigvals(vals).ravel())
    return np.concatenate(eig)


def auto_cut(sym: LogPolyhomSymbol, modes: int = 512) -> SpectralCut:
    """Cut through the middle of the widest angular gap of the sampled spectrum and leading eigenvalues."""
    eig = _spectrum_sample(sym, modes)
    eig = eig[np.abs(eig) > 0]
    ang = np.sort(np.mod(np.angle(eig), 2 * np.pi))
    gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
    k = int(np.argmax(gaps))
    if gaps[k] < MIN_GAP:
        raise AnomalyError(f"no spectral cut available: widest gap in the spectrum is {math.degrees(gaps[k]):.3f} degrees")
    return SpectralCut(ang[k] + 0.5 * gaps[k])


class _Logs:
    """Memoized logarithms and powers keyed by symbol identity."""

    def __init__(self):
        self._store: dict = {}

    def log(self, sym: LogPolyhomSymbol, cut: SpectralCut) -> LogPolyhomSymbol:
        key = ("log", id(sym), cut.angle)
        hit = self._store.get(key)
        if hit is None or hit[0] is not sym:
            hit = self._store[key] = (sym, log_symbol(sym, cut))
        return hit[1]

    def power(self, sym: LogPolyhomSymbol, z: float, cut: SpectralCut) -> LogPolyhomSymbol:
        key = ("pow", id(sym), z, cut.angle)
        hit = self._store.get(key)
        if hit is None or hit[0] is not sym:
            hit = self._store[key] = (sym, complex_power_symbol(sym, z, cut, sym.depth))
        return hit[1]


_LOGS = _Logs()


def _order(op: Operator) -> float:
    a = complex(op.order)
    if abs(a.imag) > 1e-12 or a.real <= 0:
        raise AnomalyError(f"operator {op.name or ''} must have positive real order, got {a}")
    return a.real


def product_cut(a: Operator, b: Operator, cut_ab=None) -> SpectralCut:
    if cut_ab is not None:
        return _as_cut(cut_ab)
    return auto_cut(star_product(a.symbol, b.symbol))


def _classical(sym: LogPolyhomSymbol, what: str, tol: float = 1e-8) -> PolyhomSymbol:
    if sym.log_type == 0:
        return sym
    scale = max(1.0, sym.max_norm())
    rest = float(np.max(np.abs(sym.data[:, 1:]))) if sym.log_type else 0.0
    if rest > tol * scale:
        raise AnomalyError(
            f"{what}: log|xi| coefficients do not cancel ({rest:.3e}); the cuts are inconsistent "
            "with the spectra of the factors"
        )
    return sym.as_classical(tol * scale)


# ---------------------------------------------------------------------------
# L, K and W


def L_symbol(a: Operator, b: Operator, cut_ab=None) -> PolyhomSymbol:
    """Symbol of ``log(AB) - log A - log B`` (classical, order 0)."""
    psi = product_cut(a, b, cut_ab)
    ab = star_product(a.symbol, b.symbol)
    out = _LOGS.log(ab, psi) - _LOGS.log(a.symbol, a.cut) - _LOGS.log(b.symbol, b.cut)
    return _classical(out, "L(A, B)")


def K_symbol(a: Operator, b: Operator, cut_ab=None) -> LogPolyhomSymbol:
    """``log^2(AB)/(2(a+b)) - log^2 A/(2a) - log^2 B/(2b)``."""
    oa, ob = _order(a), _order(b)
    psi = product_cut(a, b, cut_ab)
    ab = star_product(a.symbol, b.symbol)
    lab = _LOGS.log(ab, psi)
    la = _LOGS.log(a.symbol, a.cut)
    lb = _LOGS.log(b.symbol, b.cut)
    return (lab @ lab) / (2 * (oa + ob)) - (la @ la) / (2 * oa) - (lb @ lb) / (2 * ob)


def local_remainder(a: Operator, b: Operator, q: Operator | None = None, cut_ab=None) -> PolyhomSymbol:
    """``L log Q / q - K`` (``Q = B`` by default), checked to be classical."""
    q = b if q is None else q
    l_sym = L_symbol(a, b, cut_ab)
    lq = _LOGS.log(q.symbol, q.cut)
    out = (l_sym @ lq) / _order(q) - K_symbol(a, b, cut_ab)
    return _classical(out, "L log Q / q - K")


def _path_operator(a: Operator, b: Operator, s: float) -> LogPolyhomSymbol:
    return star_product(_LOGS.power(a.symbol, s, a.cut), b.symbol)


def _path_log(a: Operator, b: Operator, s: float, psi: SpectralCut) -> LogPolyhomSymbol:
    return log_symbol(_path_operator(a, b, s), psi)


def W_tau(a: Operator, b: Operator, tau: float, cut_ab=None, step: float = DERIVATIVE_STEP) -> PolyhomSymbol:
    """``d/dt|_0 L(A^t, A^tau B)`` by a Richardson-extrapolated centred difference in ``t``."""
    psi = product_cut(a, b, cut_ab)

    def diff(h):
        return (_path_log(a, b, tau + h, psi) - _path_log(a, b, tau - h, psi)) / (2 * h)

    d = (diff(step / 2) * 4 - diff(step)) / 3
    return _classical(d - _LOGS.log(a.symbol, a.cut), "W(tau)", tol=1e-6)


@dataclass
class _PathNode:
    tau: float
    weight: float
    w: PolyhomSymbol
    own: complex  # res(W log(A^tau B)) / (a tau + b)


class _TauPath:
    """``W(tau)`` and ``res(W log(A^tau B))`` at Gauss-Legendre nodes, shared by every weight."""

    _cache: dict = {}

    @classmethod
    def nodes(cls, a: Operator, b: Operator, psi: SpectralCut, count: int) -> list[_PathNode]:
        key = (id(a), id(b), psi.angle, count)
        hit = cls._cache.get(key)
        if hit is not None and hit[0] is a and hit[1] is b:
            return hit[2]
        oa, ob = _order(a), _order(b)
        x, wts = gauss_legendre(count)
        out = []
        for xk, wk in zip(x, wts):
            tau = 0.5 * (xk + 1.0)
            w = W_tau(a, b, tau, psi)
            lc = _path_log(a, b, tau, psi)
            own = residue(star_product(w, lc)) / (oa * tau + ob)
            out.append(_PathNode(tau, 0.5 * wk, w, own))
        if len(cls._cache) > 16:
            cls._cache.clear()
        cls._cache[key] = (a, b, out)
        return out


def check_path_endpoint(a: Operator, b: Operator, psi: SpectralCut, tol: float = 1e-6):
    """The path ``A^tau B`` starts at ``B``: its log along ``psi`` must be the log of ``B`` along B's own cut."""
    diff = (_LOGS.log(b.symbol, psi) - _LOGS.log(b.symbol, b.cut)).max_norm()
    if diff > tol:
        raise AnomalyError(
            f"cut {psi.angle:.6f} of AB and cut {b.cut.angle:.6f} of B give different logarithms of B "
            f"(difference {diff:.3e}); choose cut_ab in the same spectral gap as B's cut"
        )


@dataclass(frozen=True)
class PathIntegral:
    value: complex
    coarse: complex
    nodes: tuple
    integrand: tuple

    @property
    def change(self) -> float:
        return abs(self.value - self.coarse)


def trQ_L(a: Operator, b: Operator, q: Operator, cut_ab=None, nodes: int = TAU_NODES, tol: float = 1e-6) -> PathIntegral:
    """``tr^Q(L(A, B))`` from the tau-integral of residues; ``nodes`` and ``2 nodes`` must agree."""
    psi = product_cut(a, b, cut_ab)
    check_path_endpoint(a, b, psi)
    lq = _LOGS.log(q.symbol, q.cut)
    oq = _order(q)

    def integrate(count):
        pts = _TauPath.nodes(a, b, psi, count)
        vals = [p.own - residue(star_product(p.w, lq)) / oq for p in pts]
        return sum(p.weight * v for p, v in zip(pts, vals)), pts, vals

    coarse, *_ = integrate(nodes)
    fine, pts, vals = integrate(2 * nodes)
    if abs(fine - coarse) > tol:
        raise AnomalyError(f"tau quadrature did not converge: {nodes} -> {2 * nodes} nodes changed by {abs(fine - coarse):.3e}")
    return PathIntegral(complex(fine), complex(coarse), tuple(p.tau for p in pts), tuple(complex(v) for v in vals))


# ---------------------------------------------------------------------------
# determinants


def log_det_weighted(a: Operator, q: Operator, direct: bool = False) -> complex:
    """``tr^Q(log A)``."""
    la = _LOGS.log(a.symbol, a.cut)
    if direct:
        return weighted_trace_direct(la, q.symbol, q.cut).value
    return weighted_trace(la, q.symbol, q.cut, _LOGS.log(q.symbol, q.cut))


def log_det_zeta_local(a: Operator) -> complex:
    """``TR(log A) - res(log^2 A)/(2a)``."""
    la = _LOGS.log(a.symbol, a.cut)
    return canonical_trace(la) - residue(la @ la) / (2 * _order(a))


def ducourtioux_defect(a: Operator, q: Operator) -> complex:
    """``log det_zeta(A) - log det^Q(A) + res((log A - (a/q) log Q)^2)/(2a)``; vanishes identically."""
    oa, oq = _order(a), _order(q)
    d = _LOGS.log(a.symbol, a.cut) - _LOGS.log(q.symbol, q.cut) * (oa / oq)
    return log_det_zeta_local(a) - log_det_weighted(a, q) + residue(d @ d) / (2 * oa)


@dataclass(frozen=True)
class WeightedAnomaly:
    defect_formula: complex
    tau_integral: complex

    @property
    def discrepancy(self) -> float:
        return abs(self.defect_formula - self.tau_integral)


def detQ_anomaly(a: Operator, b: Operator, q: Operator, cut_ab=None) -> WeightedAnomaly:
    """``log det^Q(AB) - log det^Q(A) - log det^Q(B) = tr^Q(L(A, B))`` two ways."""
    l_sym = L_symbol(a, b, cut_ab)
    defect = weighted_trace(l_sym, q.symbol, q.cut, _LOGS.log(q.symbol, q.cut))
    return WeightedAnomaly(complex(defect), trQ_L(a, b, q, cut_ab).value)


# ---------------------------------------------------------------------------
# zeta anomaly


@dataclass
class AnomalyReport:
    log_M_local: complex
    log_M_spectral: complex | None
    commuting: bool
    cut_ab: float
    trQL_integral: complex = 0j
    K_residue: complex = 0j
    L_logQ_residue: complex = 0j
    swapped: complex | None = None
    commuting_formula: complex | None = None
    tau_nodes: tuple = ()
    tau_values: tuple = ()
    config: dict = field(default_factory=dict)

    @property
    def discrepancy(self) -> float | None:
        if self.log_M_spectral is None:
            return None
        return abs(self.log_M_local - self.log_M_spectral)

    @property
    def swap_discrepancy(self) -> float | None:
        return None if self.swapped is None else abs(self.log_M_local - self.swapped)

    def to_json(self) -> dict:
        def c(v):
            return None if v is None else [float(np.real(v)), float(np.imag(v))]

        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, (complex, np.complexfloating)) or v is None:
                out[k] = c(v)
            elif isinstance(v, tuple):
                out[k] = [c(t) if isinstance(t, complex) else float(t) for t in v]
            else:
                out[k] = v
        out["discrepancy"] = self.discrepancy
        out["swap_discrepancy"] = self.swap_discrepancy
        return out


def commuting_anomaly(a: Operator, b: Operator) -> complex:
    """``(ab/(2(a+b))) res((log A/a - log B/b)^2)``."""
    oa, ob = _order(a), _order(b)
    d = _LOGS.log(a.symbol, a.cut) / oa - _LOGS.log(b.symbol, b.cut) / ob
    return oa * ob / (2 * (oa + ob)) * residue(d @ d)


def _weighted_assembly(a: Operator, b: Operator, q: Operator, psi: SpectralCut):
    path = trQ_L(a, b, q, psi)
    l_sym = L_symbol(a, b, psi)
    lq_res = residue(l_sym @ _LOGS.log(q.symbol, q.cut)) / _order(q)
    k_res = residue(K_symbol(a, b, psi))
    return path, lq_res, k_res


def zeta_anomaly_local(
    a: Operator,
    b: Operator,
    cut_ab=None,
    spectral: bool | None = None,
    commute_tol: float = 1e-8,
) -> AnomalyReport:
    """``log M(A, B)`` from residues and the weighted trace of ``L``.

    Commuting inputs use the closed residue formula; otherwise the
    ``B``-weighted and ``A``-weighted assemblies are both computed.  With
    multipliers the mode-sum anomaly is attached for comparison.
    """
    psi = product_cut(a, b, cut_ab)
    l_sym = L_symbol(a, b, psi)
    commuting = l_sym.max_norm() < commute_tol
    closed = commuting_anomaly(a, b)
    report = AnomalyReport(0j, None, commuting, psi.angle, commuting_formula=closed)
    if commuting:
        report.log_M_local = closed
        report.K_residue = residue(K_symbol(a, b, psi))
    else:
        path, lq_res, k_res = _weighted_assembly(a, b, b, psi)
        report.log_M_local = path.value + lq_res - k_res
        report.trQL_integral, report.L_logQ_residue, report.K_residue = path.value, lq_res, k_res
        report.tau_nodes, report.tau_values = path.nodes, path.integrand
        path_a, lq_a, _ = _weighted_assembly(a, b, a, psi)
        report.swapped = path_a.value + lq_a - k_res
    if spectral is None:
        spectral = a.is_multiplier and b.is_multiplier
    if spectral:
        report.log_M_spectral = anomaly_spectral(a.multiplier(), b.multiplier(), psi)
    report.config = {"A": a.name, "B": b.name, "cut_A": a.cut.angle, "cut_B": b.cut.angle, "cut_AB": psi.angle}
    return report
