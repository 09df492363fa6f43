"""Deterministic integrator for the density-ratio kinetic Fokker-Planck equation.

One step is a Strang splitting: half a step of Hamiltonian transport, a full
step of velocity Ornstein-Uhlenbeck relaxation, and another transport half
step.

Transport is a finite-volume scheme for the mass ``P = w * g`` whose fluxes
are built from MUSCL reconstructions of ``g`` (MC limiter, upwinded by the
characteristic speed) times the Gibbs density at the interface.  The discrete
force ``a_i`` and velocity ``b_k`` are the negative log-derivatives of the
weights, which makes the ``x`` and ``v`` flux divergences of ``g == 1`` cancel
exactly, so the equilibrium is a fixed point and mass is conserved to
round-off.  Time stepping is SSP-RK2 with automatic subcycling to keep every
forward-Euler stage positivity preserving.

The velocity relaxation uses the symmetric Chang-Cooper form
``w_k dg_k/dt = gamma/dv [W_{k+1/2}(g_{k+1}-g_k) - W_{k-1/2}(g_k-g_{k-1})]``,
whose generator is a Metzler matrix with zero row sums; it is advanced by its
exact matrix exponential, precomputed once per configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit
from scipy.linalg import expm

from .grid import Grid, PhaseDensity, project_moments
from .potentials import Potential

MASS_TOL = 1e-8
NEG_TOL = 1e-12


class SolverError(RuntimeError):
    """Raised on a CFL violation or a discretization fault."""


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters; ``gamma`` is the friction ``Gamma * sqrt(rho)``."""

    gamma: float
    dt: float
    t_end: float
    snapshot_every: int = 1

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


def cfl_limit(grid: Grid, pot: Potential) -> float:
    """Largest admissible ``dt``: ``0.5 min(dx / v_max, dv / max|U'|)``."""
    fmax = float(np.max(np.abs(pot.du(grid.x_nodes))))
    return 0.5 * min(grid.dx / grid.v_max, grid.dv / fmax)


@njit(cache=True, inline="always")
def _mc(dl, dr):
    if dl * dr <= 0.0:
        return 0.0
    mag = min(2.0 * abs(dl), 2.0 * abs(dr), 0.5 * abs(dl + dr))
    return mag if dl > 0 else -mag


@njit(cache=True)
def _slope_x(g, i, k):
    if i == 0 or i == g.shape[0] - 1:
        return 0.0
    return _mc(g[i, k] - g[i - 1, k], g[i + 1, k] - g[i, k])


@njit(cache=True)
def _slope_v(g, i, k):
    if k == 0 or k == g.shape[1] - 1:
        return 0.0
    return _mc(g[i, k] - g[i, k - 1], g[i, k + 1] - g[i, k])


@njit(cache=True)
def _transport_rate(g, b, a, wxf, wvf, inv_wx, inv_wv, out):
    nx, nv = g.shape
    out[:, :] = 0.0
    for i in range(nx - 1):
        for k in range(nv):
            if b[k] > 0.0:
                gf = g[i, k] + 0.5 * _slope_x(g, i, k)
            else:
                gf = g[i + 1, k] - 0.5 * _slope_x(g, i + 1, k)
            f = b[k] * wxf[i] * gf
            out[i, k] -= f * inv_wx[i]
            out[i + 1, k] += f * inv_wx[i + 1]
    for i in range(nx):
        # characteristic speed in v is -U'
        up = a[i] < 0.0
        for k in range(nv - 1):
            if up:
                gf = g[i, k] + 0.5 * _slope_v(g, i, k)
            else:
                gf = g[i, k + 1] - 0.5 * _slope_v(g, i, k + 1)
            f = a[i] * wvf[k] * gf
            out[i, k] += f * inv_wv[k]
            out[i, k + 1] -= f * inv_wv[k + 1]


@njit(cache=True)
def _ssprk2(g, h, n, b, a, wxf, wvf, inv_wx, inv_wv):
    r = np.empty_like(g)
    g1 = np.empty_like(g)
    for _ in range(n):
        _transport_rate(g, b, a, wxf, wvf, inv_wx, inv_wv, r)
        g1[:, :] = g + h * r
        _transport_rate(g1, b, a, wxf, wvf, inv_wx, inv_wv, r)
        g[:, :] = 0.5 * g + 0.5 * (g1 + h * r)


def _end_factor(n: int) -> np.ndarray:
    f = np.full(n, 2.0)
    f[[0, -1]] = 1.0
    return f


class KineticOperator:
    """Precomputed discrete operators for one ``(grid, potential, gamma)`` triple."""

    def __init__(self, grid: Grid, pot: Potential, gamma: float):
        self.grid = grid
        self.pot = pot
        self.gamma = float(gamma)
        wxf = np.concatenate([[0.0], grid.x_face_density, [0.0]])
        wvf = np.concatenate([[0.0], grid.v_face_density, [0.0]])
        self._wxf = grid.x_face_density
        self._wvf = grid.v_face_density
        # negative log-derivatives of the weights: force a ~ U'(x), velocity b ~ v
        self.force = -(wxf[1:] - wxf[:-1]) / grid.wx
        self.velocity = -(wvf[1:] - wvf[:-1]) / grid.wv
        # a limited face value is at most twice the cell value, and equals it
        # in the unlimited end cells
        out_x = _end_factor(grid.nx) * np.maximum(wxf[1:], wxf[:-1]) / grid.wx
        out_v = _end_factor(grid.nv) * np.maximum(wvf[1:], wvf[:-1]) / grid.wv
        self._stage_rate = float(
            np.max(np.abs(self.velocity)[None, :] * out_x[:, None]
                   + np.abs(self.force)[:, None] * out_v[None, :])
        )

    def transport_rate(self, g: np.ndarray) -> np.ndarray:
        """``-L_a g`` in conservative finite-volume form."""
        out = np.empty_like(g)
        _transport_rate(np.ascontiguousarray(g), self.velocity, self.force, self._wxf, self._wvf,
                        1.0 / self.grid.wx, 1.0 / self.grid.wv, out)
        return out

    def substeps(self, h: float) -> int:
        return max(1, math.ceil(h * self._stage_rate * (1.0 - 1e-12)))

    def transport(self, g: np.ndarray, h: float) -> np.ndarray:
        """Advance the Hamiltonian part by ``h`` with SSP-RK2 substeps."""
        n = self.substeps(h)
        g = np.array(g, dtype=float, order="C")
        _ssprk2(g, h / n, n, self.velocity, self.force, self._wxf, self._wvf,
                1.0 / self.grid.wx, 1.0 / self.grid.wv)
        return g

    def ou_generator(self) -> np.ndarray:
        """Chang-Cooper velocity generator acting on each row of ``g``."""
        wv, wf, dv = self.grid.wv, self._wvf, self.grid.dv
        n = wv.size
        L = np.zeros((n, n))
        idx = np.arange(n - 1)
        L[idx, idx + 1] = wf / (wv[:-1] * dv)
        L[idx + 1, idx] = wf / (wv[1:] * dv)
        L[np.arange(n), np.arange(n)] = -L.sum(axis=1)
        return self.gamma * L

    @cached_property
    def _ou_cache(self) -> dict:
        return {}

    def ou_propagator(self, h: float) -> np.ndarray:
        """``exp(h L)`` cleaned so that it is exactly a reversible Markov matrix.

        ``diag(wv) exp(hL)`` is symmetrized, entries below ``1e-40`` of the
        diagonal scale (and round-off negatives) are dropped, and the diagonal
        is repaired so rows sum to one.  This keeps ``g == 1`` fixed, the
        ``wv``-mass exact and the step positivity preserving.
        """
        key = float(h)
        if key not in self._ou_cache:
            E = expm(h * self.ou_generator())
            n = E.shape[0]
            sym = self.grid.wv[:, None] * E
            sym = 0.5 * (sym + sym.T)
            diag = np.diag(sym).copy()
            sym[sym < 1e-40 * np.sqrt(np.outer(diag, diag))] = 0.0
            E = sym / self.grid.wv[:, None]
            E[np.arange(n), np.arange(n)] += 1.0 - E.sum(axis=1)
            self._ou_cache[key] = E
        return self._ou_cache[key]

    def relax(self, g: np.ndarray, h: float) -> np.ndarray:
        """Exact-in-time velocity Ornstein-Uhlenbeck step of length ``h``."""
        return g @ self.ou_propagator(h).T


_OPERATORS: dict = {}


def _operator(grid: Grid, pot: Potential, gamma: float) -> KineticOperator:
    key = (id(grid), id(pot), float(gamma))
    op = _OPERATORS.get(key)
    if op is None or op.grid is not grid or op.pot is not pot:
        if len(_OPERATORS) > 16:
            _OPERATORS.clear()
        op = _OPERATORS[key] = KineticOperator(grid, pot, gamma)
    return op


def step(d: PhaseDensity, cfg: SolverConfig, pot: Potential, grid: Grid) -> PhaseDensity:
    """One Strang step: transport ``dt/2``, velocity relaxation ``dt``, transport ``dt/2``."""
    if cfg.dt > cfl_limit(grid, pot) * (1 + 1e-12):
        raise SolverError(f"dt={cfg.dt} exceeds CFL limit {cfl_limit(grid, pot):.3e}")
    op = _operator(grid, pot, cfg.gamma)
    h = 0.5 * cfg.dt
    g = op.transport(d.g, h)
    g = op.relax(g, cfg.dt)
    g = op.transport(g, h)
    gmin = float(g.min())
    if gmin < -NEG_TOL:
        raise SolverError(f"negative density {gmin:.3e} at t={d.t + cfg.dt:.6g}")
    return PhaseDensity(g, d.t + cfg.dt)


def evolve(d0: PhaseDensity, cfg: SolverConfig, pot: Potential, grid: Grid) -> list[PhaseDensity]:
    """Integrate to ``t_end`` and return snapshots every ``snapshot_every`` steps."""
    n_steps = int(round(cfg.t_end / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    traj = [d0.copy()]
    d = d0
    for n in range(1, n_steps + 1):
        d = step(d, cfg, pot, grid)
        if n % cfg.snapshot_every == 0:
            d = PhaseDensity(d.g, d0.t + n * cfg.dt)
            mass = d.mass(grid)
            if abs(mass - 1.0) > MASS_TOL:
                raise SolverError(f"mass drift {mass - 1.0:.3e} at t={d.t:.6g}")
            traj.append(d)
    return traj


def _adjoint_grad(f: np.ndarray, grid: Grid, du: np.ndarray) -> np.ndarray:
    """Discrete ``grad_x^* f = -f' + U' f`` with second-order differences."""
    return -np.gradient(f, grid.dx, edge_order=2) + du * f


def moment_residuals(traj: list[PhaseDensity], pot: Potential, grid: Grid, gamma: float) -> dict:
    """Residuals of the marginal and current equations along a trajectory.

    Time derivatives are second-order differences over snapshots (central
    inside, one-sided at the two ends).  Returns ``L^1(mu_x)`` norms at every
    snapshot, plus the same residual of the continuity equation written with
    ``m = j / q``.  ``L^1(mu_x)`` is the mass norm of ``q mu_x``; an ``L^2``
    norm would be dominated by far tails where ``q`` is huge and ``mu_x``
    negligible.
    """
    if len(traj) < 3:
        raise ValueError("need at least 3 snapshots")
    times = np.array([d.t for d in traj])
    dts = np.diff(times)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * dts[0]:
        raise ValueError("snapshots must be uniformly spaced")
    h = dts[0]
    du = pot.du(grid.x_nodes)
    fields = [project_moments(d, grid) for d in traj]
    dq_all = np.gradient(np.array([f.q for f in fields]), h, axis=0, edge_order=2)
    dj_all = np.gradient(np.array([f.j for f in fields]), h, axis=0, edge_order=2)
    res_q, res_j, res_cont = [], [], []
    for f, dq, dj in zip(fields, dq_all, dj_all):
        rq = dq - _adjoint_grad(f.j, grid, du)
        rj = dj - (-np.gradient(f.q, grid.dx, edge_order=2)
                   + _adjoint_grad(f.m * f.j, grid, du)
                   + _adjoint_grad(f.theta, grid, du)
                   - gamma * f.j)
        rc = dq - _adjoint_grad(f.m * f.q, grid, du)
        res_q.append(grid.wx @ np.abs(rq))
        res_j.append(grid.wx @ np.abs(rj))
        res_cont.append(grid.wx @ np.abs(rc))
    return {
        "t": times,
        "q": np.array(res_q),
        "j": np.array(res_j),
        "continuity": np.array(res_cont),
    }
