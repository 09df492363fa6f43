"""One-dimensional optimal transport from ``q mu_x`` to ``mu_x``.

In one dimension the Brenier map is the monotone rearrangement
``T = F_mu^{-1} o F_q``.  Both CDFs are built from the continuous densities:
``log q`` is interpolated by a not-a-knot cubic spline (exact for Gaussian
ratios against a Gaussian ``mu_x``) and each cell is integrated with 16-point
Gauss-Legendre against the exact Gibbs density ``r``.  The target quantile is
found by safeguarded Newton on the exact ``r``.  Left CDFs are used below the
median and survival functions above it, so both tails keep full relative
precision.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.interpolate import CubicSpline

from .grid import Q_FLOOR, Grid, SpatialFields
from .potentials import Potential

MASS_TOL = 1e-8
LOG_Q_MIN = np.log(1e-30)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class TransportReport:
    """Brenier map data on the x-nodes.

    ``window`` marks the nodes with ``q >= Q_FLOOR``; ``xi``-weighted sums are
    restricted to it and ``excluded_mass`` is the q-mass left out.
    """

    t_map: np.ndarray
    xi: np.ndarray
    w2: float
    window: np.ndarray
    excluded_mass: float
    c_ot: float = float("nan")
    h_eps: float = float("nan")

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.t_map) >= 0.0))


def _log_density(pot: Potential, x):
    return -pot.u(x) - np.log(pot.z_x)


def _gl_integral(f, a, b, panels: int = 1):
    """Vectorized ``int_a^b f`` over arrays of endpoints."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total = np.zeros(np.broadcast(a, b).shape)
    edges = np.linspace(0.0, 1.0, panels + 1)
    for p0, p1 in zip(edges[:-1], edges[1:]):
        lo = a + (b - a) * p0
        hi = a + (b - a) * p1
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = mid[..., None] + half[..., None] * _GL_X
        total += half * (f(pts) @ _GL_W)
    return total


class _Cdf:
    """Left CDF and survival function of a density sampled on the nodes."""

    def __init__(self, x: np.ndarray, log_dens, tail_left: float, tail_right: float):
        cells = _gl_integral(lambda s: np.exp(log_dens(s)), x[:-1], x[1:])
        left = np.concatenate([[tail_left], tail_left + np.cumsum(cells)])
        right = np.concatenate([tail_right + np.cumsum(cells[::-1])[::-1], [tail_right]])
        total = left[-1] + tail_right
        self.left = left / total
        self.right = right / total
        self.total = total


def _gaussian_tail(pot: Potential, x0: float, log_q0: float, slope: float, curv: float,
                   side: int) -> float:
    """Mass of ``q r`` beyond ``x0`` with ``log q`` continued as a quadratic.

    The curvature is capped below ``U''`` so the continuation stays integrable;
    Gaussian ratios are continued exactly.
    """
    curv = min(curv, 0.9 * pot.ddu_lower)

    def f(x):
        dx = x - x0
        return np.exp(log_q0 + slope * dx + 0.5 * curv * dx * dx + _log_density(pot, x))

    lo, hi = (-np.inf, x0) if side < 0 else (x0, np.inf)
    val, _ = quad(f, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)
    return float(val)


def _tail_span(pot: Potential, x0: float, side: int, drop: float = 60.0) -> float:
    """Distance beyond ``x0`` over which ``r`` falls by the factor ``exp(-drop)``."""
    u0 = float(pot.u(np.asarray(x0)))
    f = lambda s: float(pot.u(np.asarray(x0 + side * s))) - u0 - drop  # noqa: E731
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return float(brentq(f, 0.0, hi, xtol=1e-12))


def _solve_monotone(target, anchor_val, anchor_x, lo, hi, sign, dens, iters: int = 100):
    """Solve ``anchor_val + sign int_{anchor_x}^y dens = target`` for ``y`` in ``[lo, hi]``."""
    lo = lo.copy()
    hi = hi.copy()
    # start from the linear interpolant when the bracket is a grid cell
    y = 0.5 * (lo + hi)
    for _ in range(iters):
        partial = _gl_integral(dens, anchor_x, y, panels=8)
        phi = anchor_val + sign * partial - target
        over = sign * phi > 0
        hi = np.where(over, y, hi)
        lo = np.where(over, lo, y)
        d = sign * dens(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            y_new = y - phi / d
        bad = ~np.isfinite(y_new) | (y_new <= lo) | (y_new >= hi)
        y_new = np.where(bad, 0.5 * (lo + hi), y_new)
        if np.all(np.abs(y_new - y) <= 1e-15 * np.maximum(1.0, np.abs(y))):
            return y_new
        y = y_new
    return y


def _monotone_tails(t_map: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Clamp the map on the vacuum tails outside the window to running extrema.

    Below ``Q_FLOOR`` the source quantiles sit at the edge of floating-point
    resolution and the inverted values can jitter; those nodes carry no
    weight, so only their order is repaired.
    """
    idx = np.flatnonzero(window)
    if idx.size == 0:
        return t_map
    out = t_map.copy()
    i0, i1 = idx[0], idx[-1]
    out[: i0 + 1] = np.minimum.accumulate(out[: i0 + 1][::-1])[::-1]
    out[i1:] = np.maximum.accumulate(out[i1:])
    return out


def _check_mass(q: np.ndarray, grid: Grid) -> None:
    if np.any(q < 0):
        raise ValueError("q must be nonnegative")
    mass = float(grid.wx @ q)
    if abs(mass - 1.0) > MASS_TOL:
        raise ValueError(f"q is not normalized: sum wx q = {mass!r}")


def brenier_map(q: np.ndarray, pot: Potential, grid: Grid) -> TransportReport:
    """Monotone map pushing ``q mu_x`` onto ``mu_x``, with ``xi`` and ``W_2``.

    Raises
    ------
    ValueError
        If ``q`` is negative somewhere or not normalized to ``1 +- 1e-8``.
    """
    q = np.asarray(q, dtype=float)
    _check_mass(q, grid)
    x = grid.x_nodes
    span_l = _tail_span(pot, x[0], -1)
    span_r = _tail_span(pot, x[-1], +1)

    def log_r(s):
        return _log_density(pot, s)

    def r(s):
        return np.exp(log_r(s))

    tail_mu_l = float(quad(r, -np.inf, x[0], epsabs=0.0, epsrel=1e-10)[0])
    tail_mu_r = float(quad(r, x[-1], np.inf, epsabs=0.0, epsrel=1e-10)[0])
    mu = _Cdf(x, log_r, tail_mu_l, tail_mu_r)

    log_q = np.maximum(np.log(np.maximum(q, 1e-300)), LOG_Q_MIN)
    spline = CubicSpline(x, log_q)
    ds, dds = spline.derivative(1), spline.derivative(2)
    tails = []
    for end, side in ((0, -1), (-1, +1)):
        # a vacuum end node says nothing reliable about its tail; continue it flat
        shape = (float(ds(x[end])), float(dds(x[end]))) if q[end] >= Q_FLOOR else (0.0, 0.0)
        tails.append(_gaussian_tail(pot, x[end], log_q[end], *shape, side))
    tail_q_l, tail_q_r = tails
    src = _Cdf(x, lambda s: spline(s) + log_r(s), tail_q_l, tail_q_r)

    lower = src.left <= src.right
    t_map = np.empty_like(x)

    # left half: invert F_mu
    u = src.left[lower]
    j = np.searchsorted(mu.left, u, side="right") - 1
    j = np.clip(j, -1, x.size - 2)
    in_tail = j < 0
    jj = np.maximum(j, 0)
    anchor = np.where(in_tail, x[0], x[jj])
    a_val = np.where(in_tail, mu.left[0], mu.left[jj])
    lo = np.where(in_tail, x[0] - span_l, x[jj])
    hi = np.where(in_tail, x[0], x[jj + 1])
    y = u
    if u.size:
        # work in unnormalized units so the partial integrals need no rescaling
        y = _solve_monotone(u * mu.total, a_val * mu.total, anchor, lo, hi, +1.0, r)
        y = np.where(u <= 0.0, lo, y)
    t_map[lower] = y

    # right half: invert the survival function
    s = src.right[~lower]
    rev = mu.right[::-1]
    k = x.size - 1 - (np.searchsorted(rev, s, side="right") - 1)
    k = np.clip(k, 0, x.size)
    # k is the first node with survival <= s; the root lies in [x_{k-1}, x_k]
    in_tail = k >= x.size
    kk = np.minimum(k, x.size - 1)
    anchor = np.where(in_tail, x[-1], x[kk])
    a_val = np.where(in_tail, mu.right[-1], mu.right[kk])
    lo = np.where(in_tail, x[-1], x[np.maximum(kk - 1, 0)])
    hi = np.where(in_tail, x[-1] + span_r, x[kk])
    if s.size:
        y = _solve_monotone(s * mu.total, a_val * mu.total, anchor, lo, hi, -1.0, r)
        y = np.where(s <= 0.0, hi, y)
        t_map[~lower] = y

    window = q >= Q_FLOOR
    t_map = _monotone_tails(t_map, window)
    xi = x - t_map
    wq = grid.wx * q
    w2 = float(np.sqrt(np.sum(wq[window] * xi[window] ** 2)))
    return TransportReport(
        t_map=t_map, xi=xi, w2=w2, window=window,
        excluded_mass=float(np.sum(wq[~window])),
    )


def corrector(f: SpatialFields, tr: TransportReport, grid: Grid) -> float:
    """``C_OT = sum wx j xi`` over the transport window."""
    w = tr.window
    return float(np.sum(grid.wx[w] * f.j[w] * tr.xi[w]))


def modified_entropy(ent: float, c_ot: float, eps: float) -> float:
    """``H_eps = Ent + eps C_OT``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return float(ent + eps * c_ot)


def with_corrector(tr: TransportReport, c_ot: float, h_eps: float) -> TransportReport:
    return replace(tr, c_ot=float(c_ot), h_eps=float(h_eps))


def monge_ampere_residual(q: np.ndarray, tr: TransportReport, pot: Potential, grid: Grid,
                          window: float | None = None) -> float:
    """``max |q r - r(T) T'|`` over interior nodes, ``T'`` by centered differences.

    ``window`` optionally restricts the maximum to ``|x| <= window``.
    """
    x = grid.x_nodes
    t = tr.t_map
    dt = (t[2:] - t[:-2]) / (x[2:] - x[:-2])
    xi = x[1:-1]
    res = np.abs(q[1:-1] * pot.density(xi) - pot.density(t[1:-1]) * dt)
    keep = tr.window[1:-1]
    if window is not None:
        keep &= np.abs(xi) <= window
    return float(res[keep].max()) if np.any(keep) else 0.0


def adjoint_gradient(f: np.ndarray, pot: Potential, grid: Grid) -> np.ndarray:
    """Discrete ``grad* f = -f' + U' f`` with second-order differences."""
    return -np.gradient(f, grid.dx, edge_order=2) + pot.du(grid.x_nodes) * f


def spatial_pairings(q: np.ndarray, theta: np.ndarray, tr: TransportReport, pot: Potential,
                     grid: Grid) -> tuple[float, float]:
    """``(A, S)`` with ``A = sum wx q' xi`` and ``S = sum wx xi grad* Theta``."""
    w = tr.window
    dq = np.gradient(q, grid.dx, edge_order=2)
    a = float(np.sum(grid.wx[w] * dq[w] * tr.xi[w]))
    s = float(np.sum(grid.wx[w] * tr.xi[w] * adjoint_gradient(theta, pot, grid)[w]))
    return a, s


def stress_pairing_by_parts(theta: np.ndarray, tr: TransportReport, grid: Grid) -> float:
    """``sum wx Theta (1 - T')``, equal to ``S`` for smooth data after integrating by parts."""
    dt = np.gradient(tr.t_map, grid.dx, edge_order=2)
    w = tr.window
    return float(np.sum(grid.wx[w] * theta[w] * (1.0 - dt[w])))


def push_forward_error(q: np.ndarray, tr: TransportReport, pot: Potential, grid: Grid) -> float:
    """Largest gap between ``F_mu(T(x_i))`` and the source CDF at ``x_i``.

    Both sides are recomputed with adaptive quadrature, independently of the
    inversion; the source density interpolates ``log q`` linearly.
    """
    x = grid.x_nodes
    log_q = np.log(np.maximum(q, 1e-300))
    qf = lambda s: np.exp(np.interp(s, x, log_q)) * pot.density(s)  # noqa: E731
    f_src = np.concatenate([[0.0], np.cumsum([quad(qf, a, b)[0] for a, b in zip(x[:-1], x[1:])])])
    f_src /= f_src[-1]
    inside = np.flatnonzero((tr.t_map > x[0]) & (tr.t_map < x[-1]))
    f_mu_t = np.array([quad(pot.density, -np.inf, tr.t_map[i])[0] for i in inside])
    return float(np.max(np.abs(f_mu_t - f_src[inside])))
