import numpy as np
import pytest

from langevin_entropy import particles
from langevin_entropy.grid import make_grid
from langevin_entropy.potentials import make_quadratic, make_quartic


def test_equilibrium_sampler_quartic():
    pot = make_quartic(1.0, 0.25)
    e = particles.sample_equilibrium(pot, 200_000, seed=3)
    grid = make_grid(pot, 64, 16)
    h = particles.histogram_marginal(e, grid)
    ok = grid.wx > 1e-3
    assert np.all(np.abs(h.q[ok] - 1.0) <= 5 * h.err[ok] + 1e-3)


def test_determinism_across_workers():
    pot = make_quadratic(1.0)
    a = particles.sample_equilibrium(pot, 150_000, seed=11, workers=1)
    b = particles.sample_equilibrium(pot, 150_000, seed=11, workers=3)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)
    a1 = particles.baoab_step(a, 0.01, 1.0, pot)
    b1 = particles.baoab_step(b, 0.01, 1.0, pot, workers=3)
    assert np.array_equal(a1.x, b1.x) and a1.step == 1


def test_equilibrium_is_stationary_in_law():
    pot = make_quadratic(1.0)
    e = particles.run_ensemble(particles.sample_equilibrium(pot, 200_000, seed=5), 0.05, 1.0, pot, 1.0)
    m = particles.ensemble_moments(e)
    assert np.all(np.abs(m.mean) <= 4 * m.mean_se)
    # BAOAB has O(dt^2) bias in the position variance
    assert m.cov[0, 0] == pytest.approx(1.0, abs=4 * m.cov_se[0, 0] + 2e-3)


def test_io_roundtrip(tmp_path):
    e = particles.sample_gaussian([0.0, 1.0], np.eye(2), 1000, seed=1)
    particles.write_ensemble(tmp_path / "e.npz", e)
    back = particles.read_ensemble(tmp_path / "e.npz")
    assert np.array_equal(back.x, e.x) and back.seed == 1
    particles.write_moments_csv(tmp_path / "m.csv", [(0.0, particles.ensemble_moments(e))])
    assert (tmp_path / "m.csv").read_text().startswith("t,mean_x")


def test_histogram_rejects_escaped_particles():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 32, 16)
    e = particles.Ensemble(np.full(1000, 50.0), np.zeros(1000))
    with pytest.raises(ValueError):
        particles.histogram_marginal(e, grid)
