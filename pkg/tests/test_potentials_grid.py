import math

import numpy as np
import pytest
from scipy.integrate import quad

from langevin_entropy import initial
from langevin_entropy.grid import (
    Q_FLOOR, fiber_entropies, make_grid, project_moments, read_snapshot, write_snapshot,
)
from langevin_entropy.potentials import POTENTIALS, make_potential, make_quadratic, make_quartic


def test_quadratic_normalization():
    pot = make_quadratic(4.0)
    assert pot.z_x == pytest.approx(math.sqrt(2 * math.pi / 4.0), rel=1e-12)
    assert pot.rho == 4.0
    assert pot.du(np.array([0.5]))[0] == pytest.approx(2.0)


def test_quartic_normalization_against_quad():
    pot = make_quartic(1.0, 0.25)
    z, _ = quad(lambda x: math.exp(-0.5 * x * x - 0.25 * x**4), -np.inf, np.inf)
    assert pot.z_x == pytest.approx(z, rel=1e-10)
    assert pot.rho == 1.0
    assert quad(pot.density, -pot.x_max, pot.x_max)[0] == pytest.approx(1.0, abs=1e-12)


def test_registry_and_bad_params():
    assert set(POTENTIALS) == {"quadratic", "quartic"}
    with pytest.raises((ValueError, TypeError)):
        make_potential("quadratic", rho=-1.0)
    with pytest.raises((ValueError, KeyError)):
        make_potential("double_well")


def test_grid_weights_are_probabilities():
    pot = make_quartic(1.0, 0.25)
    g = make_grid(pot, 64, 48)
    assert g.wx.sum() == pytest.approx(1.0, abs=1e-13)
    assert g.wv.sum() == pytest.approx(1.0, abs=1e-13)
    assert g.weights.shape == (64, 48)
    with pytest.raises(ValueError):
        make_grid(pot, 4, 48)


def test_grid_gaussian_moments():
    g = make_grid(make_quadratic(1.0), 256, 256)
    # second moments of the discrete weights approximate the unit variances
    assert g.wx @ g.x_nodes**2 == pytest.approx(1.0, abs=2e-3)
    assert g.wv @ g.v_nodes**2 == pytest.approx(1.0, abs=2e-3)


def test_moment_projection_of_product_state():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 128, 128)
    d = initial.product_gaussian(grid, 1.0, 0.5, 0.3)
    f = project_moments(d, grid)
    assert grid.wx @ f.q == pytest.approx(1.0, abs=1e-12)
    # j = q m with m = m0 everywhere
    assert np.allclose(f.m[f.q > Q_FLOOR], 0.3, atol=2e-3)
    ent = fiber_entropies(d.g, f.q, grid.wv)
    assert np.allclose(ent[f.q > 1e-6], 0.045, atol=1e-3)


def test_snapshot_roundtrip(tmp_path):
    pot = make_quadratic(2.0)
    grid = make_grid(pot, 32, 24)
    d = initial.shifted_equilibrium(grid, pot, 0.3, 0.1)
    write_snapshot(tmp_path / "s.bin", grid, d)
    meta, back = read_snapshot(tmp_path / "s.bin")
    assert meta["nx"] == 32 and meta["nv"] == 24
    assert np.array_equal(back.g, d.g) and back.t == d.t
    (tmp_path / "bad.bin").write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        read_snapshot(tmp_path / "bad.bin")
