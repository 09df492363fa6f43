"""Shared fixtures: cached solver runs and the acceptance result registry."""

from __future__ import annotations

import functools

import numpy as np
import pytest

from langevin_entropy import certify, initial
from langevin_entropy.grid import make_grid
from langevin_entropy.potentials import make_quadratic, make_quartic
from langevin_entropy.solver import SolverConfig, evolve

ACCEPTANCE: dict[int, tuple[bool, str]] = {}

OU_RHO, OU_GAMMA = 4.0, 1.0
OU_MEAN, OU_COV = (1.0, 0.0), np.diag([0.25, 1.0])
QUARTIC = {"kappa": 1.0, "c4": 0.25}
QUARTIC_MEAN, QUARTIC_COV = (0.5, 0.0), np.diag([0.25, 1.0])
T_END = 2.0
SNAPSHOT_EVERY = 10


class Run:
    def __init__(self, pot, grid, traj, p):
        self.pot, self.grid, self.traj, self.p = pot, grid, traj, p

    @functools.cached_property
    def records(self):
        return certify.certify_trajectory(self.traj, self.pot, self.grid, self.p)


@functools.lru_cache(maxsize=None)
def ou_run(n: int, dt: float, every: int = SNAPSHOT_EVERY) -> Run:
    pot = make_quadratic(OU_RHO)
    grid = make_grid(pot, n, n)
    d0 = initial.gaussian(grid, pot, OU_MEAN, OU_COV)
    p = certify.CertParams(OU_GAMMA, OU_RHO)
    traj = evolve(d0, SolverConfig(p.gamma, dt, T_END, every), pot, grid)
    return Run(pot, grid, traj, p)


@functools.lru_cache(maxsize=None)
def quartic_run(n: int, dt: float, every: int = SNAPSHOT_EVERY) -> Run:
    pot = make_quartic(**QUARTIC)
    grid = make_grid(pot, n, n)
    d0 = initial.gaussian(grid, pot, QUARTIC_MEAN, QUARTIC_COV)
    p = certify.CertParams(1.0, pot.rho)
    traj = evolve(d0, SolverConfig(p.gamma, dt, T_END, every), pot, grid)
    return Run(pot, grid, traj, p)


@pytest.fixture(scope="session")
def record_acceptance():
    def record(k: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[k] = (bool(ok), detail)
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
