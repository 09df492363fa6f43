"""Named families of initial density ratios on a phase grid."""

from __future__ import annotations

import numpy as np

from .grid import Grid, PhaseDensity
from .potentials import Potential


def _normalize(g: np.ndarray, grid: Grid) -> np.ndarray:
    return g / float(grid.wx @ g @ grid.wv)


def equilibrium(grid: Grid) -> PhaseDensity:
    return PhaseDensity(np.ones((grid.nx, grid.nv)))


def gaussian(grid: Grid, pot: Potential, mean, cov, normalize: bool = True) -> PhaseDensity:
    """Ratio of the Gaussian law ``N(mean, cov)`` on ``(x, v)`` to ``mu``.

    Evaluated in log space; ``normalize`` rescales to unit discrete mass.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    prec = np.linalg.inv(cov)
    X, V = np.meshgrid(grid.x_nodes - mean[0], grid.v_nodes - mean[1], indexing="ij")
    quad = prec[0, 0] * X**2 + 2.0 * prec[0, 1] * X * V + prec[1, 1] * V**2
    log_p = -0.5 * quad - np.log(2.0 * np.pi) - 0.5 * np.log(np.linalg.det(cov))
    log_ref = (-pot.u(grid.x_nodes) - np.log(pot.z_x))[:, None] + (
        -0.5 * grid.v_nodes**2 - 0.5 * np.log(2.0 * np.pi)
    )[None, :]
    g = np.exp(log_p - log_ref)
    return PhaseDensity(_normalize(g, grid) if normalize else g)


def product(grid: Grid, q: np.ndarray, h: np.ndarray) -> PhaseDensity:
    """``g(x, v) = q(x) h(v)`` with ``q`` and ``h`` given on the nodes."""
    return PhaseDensity(np.outer(q, h))


def velocity_shift_ratio(v: np.ndarray, m0: float) -> np.ndarray:
    """Ratio of ``N(m0, 1)`` to ``N(0, 1)``."""
    return np.exp(m0 * v - 0.5 * m0 * m0)


def velocity_scale_ratio(v: np.ndarray, sigma2: float) -> np.ndarray:
    """Ratio of ``N(0, sigma2)`` to ``N(0, 1)``."""
    return np.exp(-0.5 * v * v * (1.0 / sigma2 - 1.0)) / np.sqrt(sigma2)


def position_shift_ratio(x: np.ndarray, a: float, rho: float) -> np.ndarray:
    """Ratio of ``N(a, 1/rho)`` to ``N(0, 1/rho)``."""
    return np.exp(rho * a * x - 0.5 * rho * a * a)


def position_scale_ratio(x: np.ndarray, s2: float, rho: float) -> np.ndarray:
    """Ratio of ``N(0, s2)`` to ``N(0, 1/rho)``."""
    return np.exp(-0.5 * x * x * (1.0 / s2 - rho)) / np.sqrt(s2 * rho)


def product_gaussian(grid: Grid, rho: float, a: float, m0: float) -> PhaseDensity:
    """Position shift ``a`` under ``N(0, 1/rho)`` times velocity shift ``m0``."""
    return product(grid, position_shift_ratio(grid.x_nodes, a, rho), velocity_shift_ratio(grid.v_nodes, m0))


def shifted_equilibrium(grid: Grid, pot: Potential, x_shift: float, v_shift: float = 0.0) -> PhaseDensity:
    """Gibbs law of ``pot`` translated by ``(x_shift, v_shift)``, as a ratio."""
    x, v = grid.x_nodes, grid.v_nodes
    log_q = pot.u(x) - pot.u(x - x_shift)
    g = np.outer(np.exp(log_q), velocity_shift_ratio(v, v_shift))
    return PhaseDensity(_normalize(g, grid))


def random_smooth(grid: Grid, rng: np.random.Generator, modes: int = 4,
                  amplitude: float = 0.3) -> PhaseDensity:
    """Equilibrium times ``1 + truncated Fourier perturbation``, clipped and renormalized.

    The perturbation is a random trigonometric polynomial in ``(x, v)`` with
    ``modes`` frequencies per axis and sup norm at most ``amplitude``.
    """
    xs = grid.x_nodes / grid.x_max
    vs = grid.v_nodes / grid.v_max
    k = np.arange(1, modes + 1)
    bx = np.concatenate([np.cos(np.pi * np.outer(xs, k)), np.sin(np.pi * np.outer(xs, k))], axis=1)
    bv = np.concatenate([np.cos(np.pi * np.outer(vs, k)), np.sin(np.pi * np.outer(vs, k))], axis=1)
    coef = rng.standard_normal((2 * modes, 2 * modes)) / np.tile(np.add.outer(k, k), (2, 2))
    pert = bx @ coef @ bv.T
    pert *= amplitude * rng.uniform(0.2, 1.0) / np.max(np.abs(pert))
    g = np.clip(1.0 + pert, 1e-12, None)
    return PhaseDensity(_normalize(g, grid))
