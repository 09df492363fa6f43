"""Property-based checks of the inequality machinery on closed-form states."""

import math

import numpy as np
from hypothesis import given, settings, strategies as st

from langevin_entropy import certify, constants, ou
from langevin_entropy.functionals import FunctionalReport
from langevin_entropy.transport import TransportReport

rhos = st.sampled_from([0.5, 1.0, 4.0, 16.0])
Gammas = st.floats(0.2, 6.0)


@st.composite
def gaussian_states(draw):
    rho = draw(rhos)
    sx = draw(st.floats(0.1, 4.0)) / rho
    sv = draw(st.floats(0.1, 4.0))
    corr = draw(st.floats(-0.9, 0.9))
    cxv = corr * math.sqrt(sx * sv)
    mean = [draw(st.floats(-2, 2)) / math.sqrt(rho), draw(st.floats(-2, 2))]
    return rho, ou.GaussianState(np.array(mean), np.array([[sx, cxv], [cxv, sv]]))


def _records(rho, Gamma, s):
    f = ou.ou_functionals(s, rho)
    p = certify.CertParams(Gamma, rho)
    rep = FunctionalReport(0.0, f["ent"], f["ent_x"], f["ent_v"], f["i_v"], f["j_energy"])
    tr = TransportReport(np.zeros(1), np.zeros(1), f["w2"], np.ones(1, bool), 0.0)
    h = f["ent"] + p.eps * f["c_ot"]
    return certify.instantaneous_margins(rep, tr, f["c_ot"], h, p)


@settings(max_examples=100, deadline=None)
@given(gaussian_states(), Gammas)
def test_instantaneous_margins_on_gaussians(state, Gamma):
    rho, s = state
    m = _records(rho, Gamma, s)
    assert min(m.values()) >= -1e-7, m


@settings(max_examples=100, deadline=None)
@given(gaussian_states(), Gammas)
def test_differential_margins_on_gaussians(state, Gamma):
    rho, s = state
    m = ou.ou_differential_margins(s, rho, Gamma)
    assert abs(m["ENT_DISS"]) <= 1e-6 * max(1.0, ou.ou_functionals(s, rho)["i_v"])
    assert m["C_DIFF_INEQ"] >= -1e-7 and m["H_DIFF_INEQ"] >= -1e-7


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.02, 50.0), st.floats(-5.0, 0.99), st.floats(0.01, 0.49))
def test_covariance_duality(sigma2, k, beta):
    if 1 - 2 * beta * k <= 0:
        return
    assert certify.covariance_duality_check(sigma2, None, k, beta) >= -1e-9


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.02, 50.0), st.floats(0.0, 100.0), st.floats(0.0, 1.0), st.floats(0.01, 0.49))
def test_localized_covariance(sigma2, g, chi, beta):
    assert certify.localized_covariance_check(sigma2, None, g, chi, beta) >= -1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 20.0))
def test_closure_chain(Gamma):
    assert certify.closure_chain_margin(Gamma, n=61) >= -1e-12
    assert all(constants.admissibility(Gamma).values())
