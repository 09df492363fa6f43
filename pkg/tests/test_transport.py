import numpy as np
import pytest

from langevin_entropy import initial
from langevin_entropy.grid import make_grid, project_moments
from langevin_entropy.potentials import make_quadratic, make_quartic
from langevin_entropy.transport import (
    brenier_map, corrector, modified_entropy, monge_ampere_residual, push_forward_error,
    spatial_pairings, stress_pairing_by_parts,
)


def _q(grid, fn):
    q = fn(grid.x_nodes)
    return q / (grid.wx @ q)


def test_shift_map():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 256, 16, x_max=14.0)
    tr = brenier_map(_q(grid, lambda x: initial.position_shift_ratio(x, 0.5, 1.0)), pot, grid)
    inner = np.abs(grid.x_nodes) < 4
    assert np.allclose(tr.xi[inner], 0.5, atol=1e-9)
    assert tr.w2 == pytest.approx(0.5, abs=1e-8)
    assert tr.monotone


def test_scale_map():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 256, 16, x_max=14.0)
    q = _q(grid, lambda x: initial.position_scale_ratio(x, 4.0, 1.0))
    tr = brenier_map(q, pot, grid)
    inner = np.abs(grid.x_nodes) < 6
    assert np.allclose(tr.t_map[inner], grid.x_nodes[inner] / 2, atol=1e-9)
    assert tr.w2 == pytest.approx(1.0, abs=1e-8)
    assert push_forward_error(q, tr, pot, grid) < 1e-6


def test_quartic_shifted_equilibrium():
    pot = make_quartic(1.0, 0.25)
    grid = make_grid(pot, 256, 16)
    d = initial.shifted_equilibrium(grid, pot, 0.5)
    f = project_moments(d, grid)
    tr = brenier_map(f.q, pot, grid)
    bulk = (grid.x_nodes > -1.0) & (grid.x_nodes < 1.5)
    assert np.allclose(tr.xi[bulk], 0.5, atol=1e-4)
    assert monge_ampere_residual(f.q, tr, pot, grid) < 1e-3


def test_corrector_and_modified_entropy():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 256, 256)
    d = initial.product_gaussian(grid, 1.0, 0.5, 0.3)
    f = project_moments(d, grid)
    tr = brenier_map(f.q, pot, grid)
    c = corrector(f, tr, grid)
    assert c == pytest.approx(0.15, abs=1e-4)
    assert modified_entropy(0.17, c, 1 / 12) == pytest.approx(0.17 + c / 12)
    with pytest.raises(ValueError):
        modified_entropy(0.17, c, -1.0)


def test_stress_pairing_integration_by_parts():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 256, 128)
    d = initial.gaussian(grid, pot, [0.4, 0.2], [[0.6, 0.1], [0.1, 0.8]])
    f = project_moments(d, grid)
    tr = brenier_map(f.q, pot, grid)
    _, s = spatial_pairings(f.q, f.theta, tr, pot, grid)
    assert s == pytest.approx(stress_pairing_by_parts(f.theta, tr, grid), abs=5e-3)


def test_rejects_bad_marginals():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 64, 16)
    with pytest.raises(ValueError):
        brenier_map(2.0 * np.ones(grid.nx), pot, grid)
    q = np.ones(grid.nx)
    q[3] = -1.0
    with pytest.raises(ValueError):
        brenier_map(q, pot, grid)
