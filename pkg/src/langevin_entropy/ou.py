"""Exact Gaussian solutions for the quadratic potential (kinetic Ornstein-Uhlenbeck).

For ``U = rho x^2 / 2`` a Gaussian law stays Gaussian; its mean solves
``m' = A m`` and its covariance the Lyapunov equation
``S' = A S + S A^T + D`` with ``A = [[0, 1], [-rho, -gamma]]`` and
``D = diag(0, 2 gamma)``.  Both are integrated numerically (DOP853) so the
critically damped case needs no special treatment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import constants


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-14 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 1e-14:
            raise ValueError("covariance must be positive definite")
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", cov)


def stationary(rho: float) -> GaussianState:
    return GaussianState(np.zeros(2), np.diag([1.0 / rho, 1.0]))


def drift_matrix(rho: float, gamma: float) -> np.ndarray:
    return np.array([[0.0, 1.0], [-rho, -gamma]])


def _rhs(rho, gamma):
    A = drift_matrix(rho, gamma)
    D = np.diag([0.0, 2.0 * gamma])

    def f(_t, y):
        m = y[:2]
        S = y[2:].reshape(2, 2)
        dS = A @ S + S @ A.T + D
        return np.concatenate([A @ m, dS.ravel()])

    return f


def ou_trajectory(s0: GaussianState, rho: float, gamma: float, times) -> list[GaussianState]:
    """Exact states at each entry of ``times`` (measured from ``s0.t``)."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    y0 = np.concatenate([s0.mean, s0.cov.ravel()])
    t_end = float(times.max()) if times.size else 0.0
    if t_end == 0.0:
        return [GaussianState(s0.mean, s0.cov, s0.t) for _ in times]
    sol = solve_ivp(_rhs(rho, gamma), (0.0, t_end), y0, method="DOP853",
                    t_eval=np.unique(times), rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)
    lookup = {t: sol.y[:, k] for k, t in enumerate(sol.t)}
    out = []
    for t in times:
        y = lookup[t]
        S = y[2:].reshape(2, 2)
        out.append(GaussianState(y[:2], 0.5 * (S + S.T), s0.t + t))
    return out


def ou_evolve(s0: GaussianState, rho: float, gamma: float, t: float) -> GaussianState:
    """State after time ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return s0
    return ou_trajectory(s0, rho, gamma, [t])[0]


def ou_entropy(s: GaussianState, rho: float) -> float:
    """Relative entropy of ``N(mean, cov)`` against ``N(0, diag(1/rho, 1))``."""
    prec_inf = np.diag([rho, 1.0])
    det_inf = 1.0 / rho
    det = float(np.linalg.det(s.cov))
    if det <= 0:
        raise ValueError("covariance is not positive definite")
    m = s.mean
    return 0.5 * (float(np.trace(prec_inf @ s.cov)) - 2.0 + float(m @ prec_inf @ m)
                  + np.log(det_inf / det))


def ou_functionals(s: GaussianState, rho: float) -> dict:
    """Closed-form entropy split, Fisher information, current energy, transport data.

    Position marginal ``N(mx, sxx)``; conditional velocity law is
    ``N(mv + c (x - mx), svv - c sxv)`` with ``c = sxv / sxx``.
    """
    mx, mv = s.mean
    sxx, sxv, svv = s.cov[0, 0], s.cov[0, 1], s.cov[1, 1]
    ent = ou_entropy(s, rho)
    ent_x = 0.5 * (rho * sxx - 1.0 + rho * mx * mx - np.log(rho * sxx))
    c = sxv / sxx
    cvar = svv - c * sxv
    # conditional mean mu(x) = mv + c (x - mx); E over x of mu^2
    mean_sq = mv * mv + c * c * sxx
    ent_v = 0.5 * (cvar - 1.0 - np.log(cvar)) + 0.5 * mean_sq
    i_v = _fisher_v(s)
    j_energy = mean_sq
    # Brenier map to N(0, 1/rho) is T(x) = (x - mx) / sqrt(rho sxx)
    scale = 1.0 / np.sqrt(rho * sxx)
    w2_sq = mx * mx + sxx * (1.0 - scale) ** 2
    # C = E[mu(X) (X - T(X))] = E[(mv + c (X - mx)) ((1 - scale)(X - mx) + mx)]
    c_ot = mv * mx + c * (1.0 - scale) * sxx
    return {"ent": ent, "ent_x": ent_x, "ent_v": ent_v, "i_v": i_v,
            "j_energy": j_energy, "w2": np.sqrt(w2_sq), "c_ot": c_ot}


def _fisher_v(s: GaussianState) -> float:
    # g = p / rho_inf, grad_v log g = -(P (z - m))_v + v; E|.|^2 under p
    P = np.linalg.inv(s.cov)
    # grad_v log g(z) = e_v^T (-P (z - m)) + v = w^T z + const
    w = -P[1] + np.array([0.0, 1.0])
    const = float(P[1] @ s.mean)
    mean_val = float(w @ s.mean) + const
    return mean_val**2 + float(w @ s.cov @ w)


def ou_rate_fit(t, ent) -> tuple[float, float]:
    """Least-squares decay rate of ``log ent`` versus ``t``; returns ``(rate, rms residual)``."""
    t = np.asarray(t, dtype=float)
    ent = np.asarray(ent, dtype=float)
    if t.size < 20:
        raise ValueError("need at least 20 samples")
    if np.any(ent <= 0):
        raise ValueError("entropy curve must be positive")
    y = np.log(ent)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    return float(-slope), float(np.sqrt(np.mean(resid**2)))


def main_decay_margins(t, ent, rho: float, Gamma: float) -> np.ndarray:
    """``prefactor exp(-lambda sqrt(rho) t) Ent(0) - Ent(t)`` at each sample."""
    t = np.asarray(t, dtype=float)
    ent = np.asarray(ent, dtype=float)
    env = constants.prefactor(Gamma) * np.exp(-constants.rate(Gamma) * np.sqrt(rho) * t) * ent[0]
    return env - ent


def ou_time_derivatives(s: GaussianState, rho: float, gamma: float, delta: float = 1e-3) -> dict:
    """Time derivatives of every entry of :func:`ou_functionals` along the flow.

    The state velocity ``(A m, A S + S A^T + D)`` is exact; the functionals
    are differentiated along it by a fourth-order central difference whose
    step is ``delta`` times the time the state needs to change by its
    smallest covariance scale.
    """
    A = drift_matrix(rho, gamma)
    D = np.diag([0.0, 2.0 * gamma])
    dm = A @ s.mean
    dS = A @ s.cov + s.cov @ A.T + D
    scale = np.sqrt(np.linalg.eigvalsh(s.cov)[0])
    speed = max(np.abs(dS).max() / scale**2, np.abs(dm).max() / scale, 1.0)
    h = delta / speed

    def at(c):
        return ou_functionals(GaussianState(s.mean + c * h * dm, s.cov + c * h * dS), rho)

    p1, m1, p2, m2 = at(1.0), at(-1.0), at(2.0), at(-2.0)
    return {k: (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h) for k in p1}


def ou_differential_margins(s: GaussianState, rho: float, Gamma: float) -> dict:
    """Exact margins of the corrector and modified-entropy differential inequalities."""
    gamma = Gamma * np.sqrt(rho)
    eps = float(constants.theta(Gamma)) * np.sqrt(rho)
    lam = float(constants.rate(Gamma)) * np.sqrt(rho)
    f = ou_functionals(s, rho)
    df = ou_time_derivatives(s, rho, gamma)
    h = f["ent"] + eps * f["c_ot"]
    dh = df["ent"] + eps * df["c_ot"]
    return {
        "ENT_DISS": df["ent"] + gamma * f["i_v"],
        "C_DIFF_INEQ": -f["ent_x"] - gamma * f["c_ot"] + 3.0 * f["i_v"] - df["c_ot"],
        "H_DIFF_INEQ": -lam * h - dh,
    }
