import numpy as np
import pytest

from langevin_entropy import initial
from langevin_entropy.functionals import functional_report
from langevin_entropy.grid import make_grid
from langevin_entropy.potentials import make_quadratic, make_quartic
from langevin_entropy.solver import SolverConfig, SolverError, cfl_limit, evolve, moment_residuals, step


@pytest.fixture(scope="module", params=["quadratic", "quartic"])
def case(request):
    pot = make_quadratic(4.0) if request.param == "quadratic" else make_quartic(1.0, 0.25)
    return pot, make_grid(pot, 48, 48)


def test_equilibrium_is_fixed_point(case):
    pot, grid = case
    traj = evolve(initial.equilibrium(grid), SolverConfig(2.0, 2e-3, 0.1, 10), pot, grid)
    assert np.max(np.abs(traj[-1].g - 1.0)) < 1e-12


def test_mass_positivity_and_entropy_decay(case):
    pot, grid = case
    d0 = initial.shifted_equilibrium(grid, pot, 0.3, 0.5)
    traj = evolve(d0, SolverConfig(1.0, 2e-3, 0.2, 5), pot, grid)
    ent = [functional_report(d, grid).ent for d in traj]
    assert all(abs(d.mass(grid) - 1.0) < 1e-12 for d in traj)
    assert all(d.g.min() >= 0 for d in traj)
    assert np.all(np.diff(ent) <= 1e-12)
    assert [round(d.t, 12) for d in traj] == [round(0.01 * k, 12) for k in range(21)]


def test_cfl_violation_raises(case):
    pot, grid = case
    d0 = initial.equilibrium(grid)
    with pytest.raises(SolverError):
        step(d0, SolverConfig(1.0, 10 * cfl_limit(grid, pot), 1.0), pot, grid)


def test_bad_configs():
    with pytest.raises(ValueError):
        SolverConfig(0.0, 1e-3, 1.0)
    with pytest.raises(ValueError):
        SolverConfig(1.0, 1e-3, 1.0, snapshot_every=0)
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 16, 16)
    with pytest.raises(ValueError):
        evolve(initial.equilibrium(grid), SolverConfig(1.0, 3e-3, 0.01), pot, grid)


def test_moment_residuals_vanish_at_equilibrium():
    pot = make_quadratic(1.0)
    grid = make_grid(pot, 32, 32)
    traj = evolve(initial.equilibrium(grid), SolverConfig(1.0, 5e-3, 0.05, 2), pot, grid)
    res = moment_residuals(traj, pot, grid, 1.0)
    assert np.max(res["q"]) < 1e-10 and np.max(res["j"]) < 1e-10
