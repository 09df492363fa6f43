"""Particle ensembles for the underdamped Langevin SDE (stochastic cross-check).

Random numbers come from counter-based Philox streams keyed by
``(seed, block)`` where particles are grouped in fixed blocks of
:data:`BLOCK` and the Philox counter encodes the step.  Any worker count
therefore draws exactly the same numbers.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .potentials import Potential

BLOCK = 1 << 16
OUTSIDE_LIMIT = 1e-3
# Philox advances the lowest counter word while drawing, so the step and the
# purpose live in the two highest words: counter = [0, 0, purpose, step]
_PURPOSE_STEP = 0
_PURPOSE_INIT = 1


@dataclass(frozen=True)
class Ensemble:
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0
    seed: int = 0
    step: int = 0

    def __post_init__(self):
        if self.x.shape != self.v.shape or self.x.ndim != 1:
            raise ValueError("x and v must be 1-d arrays of equal length")

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def particles(self) -> np.ndarray:
        return np.column_stack([self.x, self.v])


def _stream(seed: int, block: int, step: int, purpose: int) -> np.random.Generator:
    bits = np.random.Philox(key=[seed & (2**64 - 1), block], counter=[0, 0, purpose, step])
    return np.random.Generator(bits)


def _blocks(n: int):
    return [(b, b * BLOCK, min(n, (b + 1) * BLOCK)) for b in range((n + BLOCK - 1) // BLOCK)]


def _map_blocks(fn, n: int, workers: int):
    blocks = _blocks(n)
    if workers <= 1:
        return [fn(*blk) for blk in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda blk: fn(*blk), blocks))


def _rejection_quartic(rng: np.random.Generator, size: int, pot: Potential) -> np.ndarray:
    # U = kappa x^2 / 2 + c4 x^4 >= kappa x^2 / 2: Gaussian envelope, accept w.p. exp(-c4 x^4)
    kappa, c4 = pot.params["kappa"], pot.params["c4"]
    out = np.empty(size)
    filled = 0
    while filled < size:
        want = size - filled
        y = rng.standard_normal(2 * want + 16) / np.sqrt(kappa)
        keep = y[rng.random(y.size) < np.exp(-c4 * y**4)][:want]
        out[filled:filled + keep.size] = keep
        filled += keep.size
    return out


def sample_equilibrium(pot: Potential, n: int, seed: int, workers: int = 1) -> Ensemble:
    """Exact draw from ``mu``; Gaussian for the quadratic potential, rejection for the quartic."""
    if pot.name not in ("quadratic", "quartic"):
        raise ValueError(f"no exact sampler for potential {pot.name!r}")

    def draw(b, lo, hi):
        rng = _stream(seed, b, 0, _PURPOSE_INIT)
        if pot.name == "quadratic":
            x = rng.standard_normal(hi - lo) / np.sqrt(pot.rho)
        else:
            x = _rejection_quartic(rng, hi - lo, pot)
        return x, rng.standard_normal(hi - lo)

    parts = _map_blocks(draw, n, workers)
    return Ensemble(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                    0.0, seed, 0)


def sample_gaussian(mean, cov, n: int, seed: int, workers: int = 1) -> Ensemble:
    """Exact draw from ``N(mean, cov)`` on ``(x, v)``."""
    mean = np.asarray(mean, dtype=float)
    chol = np.linalg.cholesky(np.asarray(cov, dtype=float))

    def draw(b, lo, hi):
        z = _stream(seed, b, 0, _PURPOSE_INIT).standard_normal((hi - lo, 2))
        return mean + z @ chol.T

    pts = np.concatenate(_map_blocks(draw, n, workers))
    return Ensemble(pts[:, 0].copy(), pts[:, 1].copy(), 0.0, seed, 0)


def baoab_step(e: Ensemble, dt: float, gamma: float, pot: Potential, workers: int = 1) -> Ensemble:
    """Half kick, half drift, exact velocity OU over ``dt``, half drift, half kick."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    c1 = np.exp(-gamma * dt)
    c2 = np.sqrt(-np.expm1(-2.0 * gamma * dt))
    step = e.step + 1

    def run(b, lo, hi):
        x = e.x[lo:hi].copy()
        v = e.v[lo:hi].copy()
        v -= 0.5 * dt * pot.du(x)
        x += 0.5 * dt * v
        v = c1 * v + c2 * _stream(e.seed, b, step, _PURPOSE_STEP).standard_normal(hi - lo)
        x += 0.5 * dt * v
        v -= 0.5 * dt * pot.du(x)
        return x, v

    parts = _map_blocks(run, e.n, workers)
    return Ensemble(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                    e.t + dt, e.seed, step)


def run_ensemble(e: Ensemble, dt: float, gamma: float, pot: Potential, t_end: float,
                 workers: int = 1) -> Ensemble:
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    for _ in range(n_steps):
        e = baoab_step(e, dt, gamma, pot, workers)
    return e


@dataclass(frozen=True)
class EnsembleMoments:
    """Empirical mean and covariance of ``(x, v)`` with their standard errors."""

    mean: np.ndarray
    cov: np.ndarray
    mean_se: np.ndarray
    cov_se: np.ndarray
    n: int


def ensemble_moments(e: Ensemble) -> EnsembleMoments:
    z = e.particles
    n = z.shape[0]
    mean = z.mean(axis=0)
    c = z - mean
    prods = c[:, :, None] * c[:, None, :]
    cov = prods.mean(axis=0)
    mean_se = np.sqrt(np.diag(cov) / n)
    cov_se = prods.std(axis=0) / np.sqrt(n)
    return EnsembleMoments(mean, cov, mean_se, cov_se, n)


@dataclass(frozen=True)
class HistogramMarginal:
    """Histogram estimate of the position ratio ``q`` with binomial error bars."""

    q: np.ndarray
    err: np.ndarray
    outside_fraction: float


def histogram_marginal(e: Ensemble, grid: Grid) -> HistogramMarginal:
    """Self-normalized density ratio of the particle positions against ``mu_x``.

    Bins are the grid cells; bin ``i`` has ``mu_x``-mass ``wx[i]``.

    Raises
    ------
    ValueError
        If more than 0.1% of the particles lie outside the grid box.
    """
    h = grid.dx
    edges = np.concatenate([[grid.x_nodes[0] - 0.5 * h], 0.5 * (grid.x_nodes[1:] + grid.x_nodes[:-1]),
                            [grid.x_nodes[-1] + 0.5 * h]])
    counts, _ = np.histogram(e.x, bins=edges)
    inside = int(counts.sum())
    outside = 1.0 - inside / e.n
    if outside > OUTSIDE_LIMIT:
        raise ValueError(f"{outside:.3%} of the particles lie outside the grid box")
    p = counts / inside
    q = p / grid.wx
    err = np.sqrt(p * (1.0 - p) / inside) / grid.wx
    return HistogramMarginal(q, err, outside)


def write_ensemble(path, e: Ensemble) -> None:
    np.savez(path, x=e.x, v=e.v, t=e.t, seed=e.seed, step=e.step)


def read_ensemble(path) -> Ensemble:
    with np.load(path) as z:
        return Ensemble(z["x"].copy(), z["v"].copy(), float(z["t"]), int(z["seed"]), int(z["step"]))


def write_moments_csv(path, rows: list[tuple[float, EnsembleMoments]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mean_x", "mean_v", "cov_xx", "cov_xv", "cov_vv",
                    "se_mean_x", "se_mean_v", "se_cov_xx", "se_cov_xv", "se_cov_vv"])
        for t, m in rows:
            w.writerow([repr(float(t)), *(repr(float(a)) for a in (
                m.mean[0], m.mean[1], m.cov[0, 0], m.cov[0, 1], m.cov[1, 1],
                m.mean_se[0], m.mean_se[1], m.cov_se[0, 0], m.cov_se[0, 1], m.cov_se[1, 1]))])
