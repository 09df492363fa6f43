"""Theorem constants as functions of the friction ratio ``Gamma = gamma / sqrt(rho)``.

Accepts floats or :class:`fractions.Fraction`; fractions stay exact.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Real


def theta(Gamma: Real) -> Real:
    """Largest admissible ``theta = min(Gamma / 12, 1 / (4 Gamma))``."""
    if not Gamma > 0:
        raise ValueError("Gamma must be positive")
    return min(Gamma / 12, 1 / (4 * Gamma)) if not isinstance(Gamma, Fraction) else min(
        Gamma / 12, Fraction(1) / (4 * Gamma)
    )


def rate(Gamma: Real) -> Real:
    """``lambda_Gamma = theta / (2 (1 + theta))``; the decay rate is this times ``sqrt(rho)``."""
    th = theta(Gamma)
    return th / (2 * (1 + th))


def prefactor(Gamma: Real) -> Real:
    """``(1 + theta) / (1 - theta)``."""
    th = theta(Gamma)
    return (1 + th) / (1 - th)


def admissibility(Gamma: Real) -> dict[str, bool]:
    """The algebraic facts about ``theta`` that the closure argument uses."""
    th = theta(Gamma)
    return {
        "theta_le_gamma_over_12": th <= Gamma / 12,
        "theta_le_inv_4gamma": th * 4 * Gamma <= 1,
        "half_theta_le_gamma": th / 2 <= Gamma,
        "gamma_minus_3theta": Gamma - 3 * th >= 3 * Gamma / 4,
        "theta_below_one": th < 1,
    }
