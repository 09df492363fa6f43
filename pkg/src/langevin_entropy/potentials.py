"""Convex confining potentials and their Gibbs position marginals.

Every potential here is uniformly convex, so its log-Sobolev constant is
certified by the Bakry-Emery criterion (``rho = inf U''``) instead of being
estimated.  Potentials are shifted so that ``min U = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

# exp(-U(L)) < 1e-16 at the truncation radius
TRUNCATION_LEVEL = 16.0 * np.log(10.0)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class Potential:
    """A convex potential ``U`` together with its Gibbs marginal data.

    Attributes
    ----------
    name : str
        Registry key (``"quadratic"`` or ``"quartic"``).
    u, du : callable
        ``U`` and ``U'``, vectorized over numpy arrays.
    ddu_lower : float
        Certified lower bound on ``U''``.
    rho : float
        Log-Sobolev constant of ``mu_x``.
    z_x : float
        Normalizer ``int exp(-U) dx``.
    x_max : float
        Symmetric truncation radius with ``exp(-U(+-x_max)) < 1e-16``.
    params : dict
        Constructor parameters, kept for config round-trips.
    """

    name: str
    u: Callable[[np.ndarray], np.ndarray]
    du: Callable[[np.ndarray], np.ndarray]
    ddu_lower: float
    rho: float
    z_x: float
    x_max: float
    params: dict = field(default_factory=dict)

    def density(self, x):
        """Lebesgue density ``r(x) = exp(-U(x)) / Z_x`` of ``mu_x``."""
        return np.exp(-self.u(np.asarray(x, dtype=float))) / self.z_x


def _truncation_radius(u: Callable) -> float:
    # both shipped families are even, so one side suffices
    hi = 1.0
    while u(np.array(hi)) < TRUNCATION_LEVEL:
        hi *= 2.0
    return float(brentq(lambda s: float(u(np.array(s))) - TRUNCATION_LEVEL, 0.0, hi, xtol=1e-14))


def gauss_legendre_integral(f: Callable, a: float, b: float, panels: int = 400) -> float:
    """Composite 16-point Gauss-Legendre quadrature of ``f`` over ``[a, b]``."""
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * f(pts)))


def make_quadratic(rho: float) -> Potential:
    """Quadratic potential ``U(x) = rho x^2 / 2``; ``mu_x = N(0, 1/rho)``."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    rho = float(rho)

    def u(x):
        return 0.5 * rho * np.square(x)

    def du(x):
        return rho * np.asarray(x, dtype=float)

    return Potential(
        name="quadratic",
        u=u,
        du=du,
        ddu_lower=rho,
        rho=rho,
        z_x=float(np.sqrt(2.0 * np.pi / rho)),
        x_max=_truncation_radius(u),
        params={"rho": rho},
    )


def make_quartic(kappa: float, c4: float) -> Potential:
    """Quartic potential ``U(x) = kappa x^2 / 2 + c4 x^4``.

    ``U'' >= kappa`` everywhere, so ``rho = kappa``.  The minimum is at the
    origin with value zero, so no shift is needed.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if c4 < 0:
        raise ValueError(f"c4 must be nonnegative, got {c4}")
    kappa, c4 = float(kappa), float(c4)

    def u(x):
        x2 = np.square(x)
        return 0.5 * kappa * x2 + c4 * x2 * x2

    def du(x):
        x = np.asarray(x, dtype=float)
        return kappa * x + 4.0 * c4 * x**3

    x_max = _truncation_radius(u)
    z_x = gauss_legendre_integral(lambda s: np.exp(-u(s)), -x_max, x_max)
    return Potential(
        name="quartic",
        u=u,
        du=du,
        ddu_lower=kappa,
        rho=kappa,
        z_x=z_x,
        x_max=x_max,
        params={"kappa": kappa, "c4": c4},
    )


def marginal_density(p: Potential, x):
    """Evaluate ``r(x) = exp(-U(x)) / Z_x``."""
    return p.density(x)


POTENTIALS = {
    "quadratic": make_quadratic,
    "quartic": make_quartic,
}


def make_potential(name: str, **params) -> Potential:
    """Build a potential from its registry key and parameter table."""
    try:
        factory = POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; expected one of {sorted(POTENTIALS)}") from None
    return factory(**params)
