import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm, solve_continuous_lyapunov

from langevin_entropy import constants, ou


@pytest.mark.parametrize("G", [0.1, 0.5, 1.0, math.sqrt(3.0), 2.0, 4.0, 10.0])
def test_theta_branches(G):
    th = constants.theta(G)
    assert th == pytest.approx(min(G / 12, 1 / (4 * G)))
    assert all(constants.admissibility(G).values())


def test_theta_is_maximal_at_sqrt3():
    G = Fraction(1)
    assert constants.theta(G) == Fraction(1, 12)
    assert max(constants.theta(g) for g in np.linspace(0.1, 10, 1001)) <= 1 / (4 * math.sqrt(3)) + 1e-15
    with pytest.raises(ValueError):
        constants.theta(0.0)


def _closed_form(s0, rho, gamma, t):
    # m(t) = e^{tA} m0; S(t) = S_inf + e^{tA} (S0 - S_inf) e^{tA^T}
    A = ou.drift_matrix(rho, gamma)
    E = expm(t * A)
    s_inf = solve_continuous_lyapunov(A, -np.diag([0.0, 2 * gamma]))
    return E @ s0.mean, s_inf + E @ (s0.cov - s_inf) @ E.T


@pytest.mark.parametrize("rho,gamma", [(1.0, 1.0), (4.0, 2.0), (1.0, 2.0), (16.0, 0.5)])
def test_trajectory_against_matrix_exponential(rho, gamma):
    s0 = ou.GaussianState(np.array([1.0, -0.5]), np.array([[0.3, 0.1], [0.1, 2.0]]))
    for t, s in zip([0.3, 1.0, 2.5], ou.ou_trajectory(s0, rho, gamma, [0.3, 1.0, 2.5])):
        m, S = _closed_form(s0, rho, gamma, t)
        assert np.allclose(s.mean, m, atol=1e-10) and np.allclose(s.cov, S, atol=1e-10)


def test_stationary_is_fixed_and_zero_entropy():
    s = ou.stationary(4.0)
    assert ou.ou_entropy(s, 4.0) == pytest.approx(0.0, abs=1e-15)
    s1 = ou.ou_evolve(s, 4.0, 2.0, 3.0)
    assert np.allclose(s1.cov, s.cov, atol=1e-10)


def test_functionals_product_state():
    # x ~ N(a, 1/rho), v ~ N(m0, 1): Ent_x = rho a^2 / 2, Ent_v = m0^2 / 2
    rho, a, m0 = 2.0, 0.4, 0.3
    f = ou.ou_functionals(ou.GaussianState(np.array([a, m0]), np.diag([1 / rho, 1.0])), rho)
    assert f["ent_x"] == pytest.approx(rho * a * a / 2)
    assert f["ent_v"] == pytest.approx(m0 * m0 / 2)
    assert f["ent"] == pytest.approx(f["ent_x"] + f["ent_v"])
    assert f["i_v"] == pytest.approx(m0 * m0) and f["j_energy"] == pytest.approx(m0 * m0)
    assert f["w2"] == pytest.approx(a) and f["c_ot"] == pytest.approx(a * m0)


def test_entropy_dissipation_identity():
    s = ou.GaussianState(np.array([1.0, 0.5]), np.array([[0.4, -0.1], [-0.1, 1.5]]))
    m = ou.ou_differential_margins(s, 4.0, 1.0)
    assert abs(m["ENT_DISS"]) < 1e-7
    assert m["C_DIFF_INEQ"] >= -1e-9 and m["H_DIFF_INEQ"] >= -1e-9


def test_rate_fit_recovers_exponential():
    t = np.linspace(0, 3, 50)
    rate, rms = ou.ou_rate_fit(t, 2.0 * np.exp(-0.7 * t))
    assert rate == pytest.approx(0.7) and rms < 1e-12
    with pytest.raises(ValueError):
        ou.ou_rate_fit(t[:5], np.ones(5))


def test_invalid_covariance():
    with pytest.raises(ValueError):
        ou.GaussianState(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
