"""Holomorphic functional calculus on symbols.

Complex powers, logarithms and sectorial projectors are computed from the
homogeneous components of the resolvent ``(sigma - lambda)^{-1}`` integrated
over a keyhole contour around the spectral cut.  The contour consists of a
small circle of radius ``r`` and the two sides of the ray at angle ``theta``;
the two ray legs share nodes and only differ through the branch of the
weight function, so they are merged into one integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .symbols import (
    ExactSymbol,
    LogPolyhomSymbol,
    PolyhomSymbol,
    SymbolError,
    batch_inverse,
    identity_symbol,
    inverse_symbol,
    make_symbol,
    parametrix_recursion,
    star_power,
    star_product,
    xi_derivatives,
)

TWO_PI = 2.0 * np.pi
CONVERGENCE_TOL = 1e-11


class AdmissibilityError(SymbolError):
    """An eigenvalue sits on (or too close to) a spectral cut."""


class QuadratureError(SymbolError):
    """Contour quadrature failed to converge."""


# ---------------------------------------------------------------------------
# spectral cuts


@dataclass(frozen=True)
class SpectralCut:
    """Ray ``L_theta``; arguments are taken in ``[theta - 2 pi, theta)``."""

    angle: float = math.pi

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)

    def arg(self, lam) -> np.ndarray:
        lo = self.angle - TWO_PI
        return lo + np.mod(np.angle(lam) - lo, TWO_PI)

    def log(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        return np.log(np.abs(lam)) + 1j * self.arg(lam)

    def power(self, lam, z: complex) -> np.ndarray:
        return np.exp(z * self.log(lam))

    def ray_distance(self, mu) -> np.ndarray:
        """Distance from ``mu`` to the closed ray ``{rho e^{i theta}, rho >= 0}``."""
        w = np.asarray(mu, dtype=complex) * np.exp(-1j * self.angle)
        return np.where(w.real >= 0, np.abs(w.imag), np.abs(w))

    def check(self, values: np.ndarray, what: str = "leading symbol", tol: float = 1e-8) -> np.ndarray:
        """Raise unless no eigenvalue of ``values[..., m, m]`` lies on the ray."""
        eig = np.linalg.eigvals(values)
        dist = self.ray_distance(eig)
        if dist.size and np.min(dist) <= tol:
            idx = np.unravel_index(np.argmin(dist), dist.shape)
            raise AdmissibilityError(
                f"{what}: eigenvalue {complex(eig[idx]):.6g} on the cut ray at angle "
                f"{self.angle:.6g} (index {tuple(int(i) for i in idx[:-1])})"
            )
        return eig


def _as_cut(cut) -> SpectralCut:
    if cut is None:
        return SpectralCut()
    if isinstance(cut, SpectralCut):
        return cut
    return SpectralCut(float(cut))


# ---------------------------------------------------------------------------
# quadrature helpers


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _panel_nodes(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None]
    weights = half * w[None]
    return nodes.ravel(), weights.ravel()


def _ray_edges(u0: float, u_top: float, near: list[tuple[float, float]], tail: float = 46.0) -> np.ndarray:
    """Panel breakpoints in ``u = log rho`` from ``u0`` to ``u_top + tail``.

    ``near`` lists ``(log|mu|, relative distance)`` of eigenvalues close to
    the ray; breakpoints cluster geometrically around them.
    """
    u_top = max(u_top, u0 + 0.5)
    edges = list(np.arange(u0, u_top, 0.5)) + [u_top]
    width, u = 1.0, u_top
    while u < u_top + tail:
        u = u + width
        edges.append(u)
        width = min(2 * width, 4.0)
    extra = []
    for lu, rel in near:
        h = max(rel, 1e-6)
        while h < 0.5:
            extra += [lu - h, lu + h]
            h *= 2.0
        extra.append(lu)
    edges = np.unique(np.concatenate([edges, [e for e in extra if u0 < e < edges[-1]]]))
    # drop slivers produced by merging
    keep = [edges[0]]
    for e in edges[1:]:
        if e - keep[-1] > 1e-9:
            keep.append(e)
    return np.asarray(keep)


@dataclass(frozen=True)
class Contour:
    """Quadrature for the keyhole around ``L_theta`` (or the boundary of a cone).

    ``lam`` holds nodes; ``dlam`` the quadrature weight times ``d lambda``
    along the direction of integration.  Ray nodes carry ``leg = 0``, arc
    nodes ``leg = 1``.
    """

    theta: float
    radius: float
    lam: np.ndarray
    dlam: np.ndarray
    leg: np.ndarray
    arc_arg: np.ndarray
    nodes_per_panel: int

    @property
    def size(self) -> int:
        return self.lam.size

    def weights(self, kind: str, z: complex = 0.0) -> np.ndarray:
        """Node weights ``w`` such that ``(i/2pi) sum w_p b(lam_p)`` is the contour integral.

        ``kind`` selects the weight function: ``"power"`` for ``lam^z``,
        ``"log"`` for ``lam^{-1} log lam``, ``"inverse"`` for ``lam^{-1}``.
        """
        ray = self.leg == 0
        u = np.log(np.abs(self.lam))
        w = np.zeros(self.size, dtype=complex)
        th = self.theta
        if kind == "power":
            rayf = np.exp(z * u[ray]) * (np.exp(1j * z * (th - TWO_PI)) - np.exp(1j * z * th))
            arcf = np.exp(z * (u[~ray] + 1j * self.arc_arg[~ray]))
        elif kind == "log":
            rayf = np.exp(-u[ray] - 1j * th) * (-2j * np.pi)
            arcl = u[~ray] + 1j * self.arc_arg[~ray]
            arcf = np.exp(-arcl) * arcl
        elif kind == "inverse":
            rayf = np.zeros(ray.sum(), dtype=complex)
            arcf = 1.0 / self.lam[~ray]
        else:
            raise ValueError(f"unknown weight kind {kind!r}")
        w[ray] = self.dlam[ray] * rayf
        w[~ray] = self.dlam[~ray] * arcf
        return w


def keyhole(theta: float, radius: float, u_top: float, near=(), n: int = 16, arc_panels: int = 8) -> Contour:
    """Keyhole contour: rays from ``radius`` outward along angle theta, circle clockwise."""
    edges = _ray_edges(math.log(radius), u_top, list(near))
    u, wu = _panel_nodes(edges, n)
    lam_r = np.exp(u + 1j * theta)
    d_r = lam_r * wu  # d lambda = lambda du
    t_edges = np.linspace(theta - TWO_PI, theta, arc_panels + 1)
    t, wt = _panel_nodes(t_edges, n)
    lam_a = radius * np.exp(1j * t)
    d_a = -wt * 1j * lam_a  # circle traversed from theta down to theta - 2 pi
    return Contour(
        theta,
        radius,
        np.concatenate([lam_r, lam_a]),
        np.concatenate([d_r, d_a]),
        np.concatenate([np.zeros(u.size, int), np.ones(t.size, int)]),
        np.concatenate([np.full(u.size, np.nan), t]),
        n,
    )


def cone_contour(theta: float, phi: float, radius: float, u_top: float, near=(), n: int = 16) -> Contour:
    """Boundary of ``{rho e^{it}: theta < t < phi, rho > radius}``, counterclockwise around the cone."""
    edges = _ray_edges(math.log(radius), u_top, list(near))
    u, wu = _panel_nodes(edges, n)
    lam1 = np.exp(u + 1j * theta)
    lam2 = np.exp(u + 1j * phi)
    npan = max(2, int(math.ceil((phi - theta) / (np.pi / 4))))
    t, wt = _panel_nodes(np.linspace(theta, phi, npan + 1), n)
    lam_a = radius * np.exp(1j * t)
    lam = np.concatenate([lam1, lam2, lam_a])
    dlam = np.concatenate([lam1 * wu, -lam2 * wu, -wt * 1j * lam_a])
    return Contour(theta, radius, lam, dlam, np.ones(lam.size, int), np.full(lam.size, np.nan), n)


def _cone_weights(contour: Contour) -> np.ndarray:
    """Weights for ``lam^{-1}`` on a cone contour, normalized like :meth:`Contour.weights`.

    The counterclockwise Riesz integral ``(1/2 pi i) oint (lam - A)^{-1}`` equals
    ``(i/2 pi) oint (A - lam)^{-1}``, matching the resolvent sign used here.
    """
    return contour.dlam / contour.lam


# ---------------------------------------------------------------------------
# contour geometry from leading values


def _leading_geometry(values: np.ndarray, cut: SpectralCut, extra_angle: float | None = None):
    """Radius, top log-modulus and near-ray eigenvalue info for ``values[..., m, m]``."""
    eig = cut.check(values)
    sv = np.linalg.svd(values, compute_uv=False)
    smin = float(np.min(sv[..., -1]))
    if smin <= 1e-10:
        raise SymbolError("leading values are singular")
    radius = 0.5 * smin
    u_top = math.log(4.0 * float(np.max(np.abs(eig))))
    near = _near_ray(eig.ravel(), cut.angle)
    if extra_angle is not None:
        near += _near_ray(eig.ravel(), extra_angle)
    return radius, u_top, near


def _near_ray(eig: np.ndarray, angle: float, threshold: float = 0.3) -> list[tuple[float, float]]:
    w = eig * np.exp(-1j * angle)
    mod = np.abs(w)
    rel = np.abs(w.imag) / mod
    sel = (w.real > 0) & (rel < threshold)
    pts: dict[float, float] = {}
    for lu, rr in zip(np.log(mod[sel]), rel[sel]):
        key = round(float(lu), 2)
        pts[key] = min(pts.get(key, 1.0), float(rr))
    return sorted(pts.items())


# ---------------------------------------------------------------------------
# resolvent components


def _classical(sigma: LogPolyhomSymbol) -> PolyhomSymbol:
    if sigma.log_type:
        raise SymbolError("functional calculus needs a classical symbol")
    return sigma


def resolvent_components(sigma: PolyhomSymbol, lam: np.ndarray, depth: int) -> list[np.ndarray]:
    """Components ``b_{-a-j}(x, +-1, lam)`` for every node: arrays (2, g, P, m, m)."""
    sigma = _classical(sigma)
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    x_const = sigma.grid_size == 1
    dxi = [d[:, 0] for d in xi_derivatives(sigma, 1 if x_const else depth)]
    lead = sigma.data[0, 0][:, :, None] - lam[None, None, :, None, None] * np.eye(sigma.rank)
    lead_inv = batch_inverse(lead)
    return parametrix_recursion(dxi, lead_inv, depth, x_const)


def resolvent_symbols(sigma: PolyhomSymbol, lam: complex, depth: int | None = None) -> list[np.ndarray]:
    """Resolvent components at a single spectral parameter: list of (2, g, m, m) arrays."""
    depth = sigma.depth if depth is None else depth
    lead = sigma.data[0, 0]
    eig = np.linalg.eigvals(lead)
    if np.min(np.abs(eig - lam)) <= 1e-10:
        raise SymbolError(f"lambda = {lam} is within 1e-10 of a leading eigenvalue")
    comps = resolvent_components(sigma, np.array([lam]), depth)
    return [c[:, :, 0] for c in comps]


def _integrate(sigma: PolyhomSymbol, contour: Contour, weight_sets: list[np.ndarray], depth: int, chunk: int = 256):
    """``(i/2pi) sum_p w_p b_j(lam_p)`` for every weight vector; arrays (depth, 2, g, m, m)."""
    g, m = sigma.grid_size, sigma.rank
    outs = [np.zeros((depth, 2, g, m, m), dtype=complex) for _ in weight_sets]
    for start in range(0, contour.size, chunk):
        sl = slice(start, start + chunk)
        comps = resolvent_components(sigma, contour.lam[sl], depth)
        for out, w in zip(outs, weight_sets):
            ws = w[sl]
            for j, b in enumerate(comps):
                out[j] += np.einsum("p,sgpab->sgab", ws, b)
    return [out * (1j / TWO_PI) for out in outs]


def _level_change(new: list[np.ndarray], old: list[np.ndarray]) -> float:
    worst = 0.0
    for r, p in zip(new, old):
        floor = 1e-6 * max(np.max(np.abs(r)), 1e-300)
        for j in range(r.shape[0]):
            scale = max(np.max(np.abs(r[j])), floor)
            worst = max(worst, float(np.max(np.abs(r[j] - p[j])) / scale))
    return worst


def _converged_integrals(sigma, build, weight_fn, depth):
    """Integrate with doubling node counts until the relative change per level is small.

    After the last doubling a change that has stopped decreasing is taken
    as the rounding floor of the recursion and accepted below 1e-5.
    """
    prev, changes = None, []
    for n in (16, 32, 64):
        contour = build(n)
        res = _integrate(sigma, contour, weight_fn(contour), depth)
        if prev is not None:
            changes.append(_level_change(res, prev))
            if changes[-1] < CONVERGENCE_TOL:
                return res
        prev = res
    if len(changes) == 2 and changes[1] < 1e-5 and changes[1] > 0.1 * changes[0]:
        return res
    raise QuadratureError(f"contour quadrature did not converge (relative change {changes[-1]:.2e})")


def _keyhole_builder(sigma: PolyhomSymbol, cut: SpectralCut):
    radius, u_top, near = _leading_geometry(sigma.data[0, 0], cut)
    return lambda n: keyhole(cut.angle, radius, u_top, near, n)


# ---------------------------------------------------------------------------
# pointwise matrix functions (exact evaluators)


def _scaled_batch(mats: np.ndarray):
    sv = np.linalg.svd(mats, compute_uv=False)
    scale = 0.5 * sv[..., -1]
    if np.min(scale) <= 0:
        raise SymbolError("singular matrix in pointwise functional calculus")
    return mats / scale[:, None, None], scale


def matrix_function(mats: np.ndarray, cut: SpectralCut, kind: str, z: complex = 0.0) -> np.ndarray:
    """``M^z`` (kind ``"power"``) or ``log M`` (kind ``"log"``) for a batch (n, m, m).

    Scalars use the branch directly; matrices go through the keyhole
    integral of the resolvent after rescaling each matrix so that its
    smallest singular value is 2.
    """
    mats = np.asarray(mats, dtype=complex)
    n, m, _ = mats.shape
    if m == 1:
        v = mats[:, 0, 0]
        if kind == "power":
            return cut.power(v, z)[:, None, None]
        return cut.log(v)[:, None, None]
    cut.check(mats, "matrix values")
    if kind == "power":
        z = complex(z)
        if z == 0:
            return np.broadcast_to(np.eye(m, dtype=complex), mats.shape).copy()
        if _is_integer(z) and z.real > 0:
            return np.linalg.matrix_power(mats, int(round(z.real)))
        if z.real > -1:
            k = int(math.ceil(z.real)) + 1
            return np.linalg.matrix_power(mats, k) @ matrix_function(mats, cut, kind, z - k)
    scaled, scale = _scaled_batch(mats)
    eig = np.linalg.eigvals(scaled)
    u_top = math.log(4.0 * float(np.max(np.abs(eig))))
    near = _near_ray(eig.ravel(), cut.angle)
    eye = np.eye(m)
    prev = None
    for npp in (16, 32, 64):
        contour = keyhole(cut.angle, 1.0, u_top, near, npp)
        if kind == "power":
            w = contour.weights("power", z)
        else:
            w = contour.weights("log")
        acc = np.zeros((n, m, m), dtype=complex)
        for start in range(0, contour.size, 128):
            lam = contour.lam[start: start + 128]
            res = batch_inverse(scaled[:, None] - lam[None, :, None, None] * eye)
            acc += np.einsum("p,npab->nab", w[start: start + 128], res)
        acc *= 1j / TWO_PI
        if kind == "log":
            acc = scaled @ acc  # M * (M^{-1} log M)
        if prev is not None:
            change = np.max(np.abs(acc - prev)) / max(np.max(np.abs(acc)), 1e-300)
            if change < 1e-12:
                break
        prev = acc
    if kind == "power":
        return acc * np.exp(z * np.log(scale))[:, None, None]
    return acc + np.log(scale)[:, None, None] * eye


def _exact_power(exact: ExactSymbol | None, cut: SpectralCut, z: complex):
    if exact is None or exact.x_dependent:
        return None
    return ExactSymbol(lambda xi: matrix_function(exact.fn(xi), cut, "power", z))


def _exact_log(exact: ExactSymbol | None, cut: SpectralCut):
    if exact is None or exact.x_dependent:
        return None
    return ExactSymbol(lambda xi: matrix_function(exact.fn(xi), cut, "log"))


# ---------------------------------------------------------------------------
# complex powers, logarithms, projectors


def _is_integer(z: complex, tol: float = 1e-14) -> bool:
    return abs(z.imag) < tol and abs(z.real - round(z.real)) < tol


def complex_power_symbol(sigma: PolyhomSymbol, z: complex, cut=None, depth: int | None = None) -> PolyhomSymbol:
    """Symbol of ``A_theta^z``.

    The Cauchy integral is only used for exponents with real part at most
    -1; other exponents go through ``A^k * A^{z-k}``.
    """
    sigma = _classical(sigma)
    cut = _as_cut(cut)
    depth = sigma.depth if depth is None else depth
    z = complex(z)
    if z == 0:
        return identity_symbol(sigma.rank, depth)
    if _is_integer(z) and z.real > 0:
        cut.check(sigma.data[0, 0])
        return star_power(sigma, int(round(z.real)), depth)
    k = 0 if z.real <= -1 else int(math.ceil(z.real)) + 1
    w = z - k
    build = _keyhole_builder(sigma, cut)
    (comp,) = _converged_integrals(sigma, build, lambda c: [c.weights("power", w)], depth)
    power = PolyhomSymbol(sigma.order * w, comp[:, None], _exact_power(sigma.exact, cut, w), sigma.cutoff)
    if k:
        power = star_product(star_power(sigma, k, depth), power, depth)
    return PolyhomSymbol(sigma.order * z, power.data, _exact_power(sigma.exact, cut, z), sigma.cutoff)


def log_symbol(sigma: PolyhomSymbol, cut=None, depth: int | None = None) -> LogPolyhomSymbol:
    """Symbol of ``log_theta A = a log|xi| I + sigma_0``.

    Computed as ``sigma * F`` where ``F`` is the symbol of ``A^{-1} log A``:
    its values at ``|xi| = 1`` come from the contour integral of
    ``lam^{-1} log(lam)`` against the resolvent, and homogeneity in
    ``(xi, lam^{1/a})`` adds ``a log|xi|`` times the inverse symbol.
    """
    sigma = _classical(sigma)
    cut = _as_cut(cut)
    depth = sigma.depth if depth is None else depth
    build = _keyhole_builder(sigma, cut)
    (comp,) = _converged_integrals(sigma, build, lambda c: [c.weights("log")], depth)
    inv = inverse_symbol(sigma, depth)
    data = np.zeros((depth, 2) + comp.shape[1:], dtype=complex)
    data[:, 0] = comp
    data[:, 1] = sigma.order * inv.data[:, 0]
    f = make_symbol(-sigma.order, data, keep_log=True)
    out = star_product(sigma.without_exact(), f, depth)
    result = out.data.copy()
    if result.shape[1] < 2:
        result = np.concatenate([result, np.zeros_like(result)], axis=1)
    # the log|xi| coefficient is exactly a * I; clear quadrature noise there
    result[:, 1] = 0.0
    result[0, 1] = sigma.order * np.eye(sigma.rank)
    return LogPolyhomSymbol(0, result[:, :2], _exact_log(sigma.exact, cut), sigma.cutoff)


def sectorial_projector_symbol(sigma: PolyhomSymbol, theta: float, phi: float, depth: int | None = None) -> PolyhomSymbol:
    """Symbol of the projector onto the spectrum inside the cone ``theta < arg < phi``."""
    sigma = _classical(sigma)
    depth = sigma.depth if depth is None else depth
    theta, phi = float(theta), float(phi)
    if not theta < phi < theta + TWO_PI:
        raise SymbolError("need theta < phi < theta + 2 pi")
    c1, c2 = SpectralCut(theta), SpectralCut(phi)
    lead = sigma.data[0, 0]
    c1.check(lead, "cone boundary")
    c2.check(lead, "cone boundary")
    radius, u_top, near = _leading_geometry(lead, c1, extra_angle=phi)

    def build(n):
        return cone_contour(theta, phi, radius, u_top, near, n)

    (comp,) = _converged_integrals(sigma, build, lambda c: [_cone_weights(c)], depth)
    f = PolyhomSymbol(-sigma.order, comp[:, None])
    out = star_product(sigma.without_exact(), f, depth)
    return PolyhomSymbol(0, out.data, None, sigma.cutoff)


def real_power(sigma: PolyhomSymbol, t: float, cut=None, depth: int | None = None) -> PolyhomSymbol:
    return complex_power_symbol(sigma, t, cut, depth)
