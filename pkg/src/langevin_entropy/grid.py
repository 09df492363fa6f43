"""Tensor-product phase-space grid, density ratios and velocity moments.

The grid carries probability quadratures ``wx`` for ``mu_x`` and ``wv`` for the
standard Gaussian ``kappa`` on uniform nodes.  Densities are stored as the
ratio ``g = p / rho_inf`` so that the equilibrium is ``g == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import kl_div

from .potentials import Potential

Q_FLOOR = 1e-12
V_MAX = 8.0

_MAGIC = "langevin_entropy.phase_density.v1"


@dataclass(frozen=True)
class Grid:
    """Uniform ``(x, v)`` grid with Gibbs quadrature weights.

    ``x_face_density``/``v_face_density`` hold the Gibbs densities (same
    normalization as the weights) at the interior cell interfaces; the solver
    builds its conservative fluxes from them.
    """

    x_nodes: np.ndarray
    v_nodes: np.ndarray
    wx: np.ndarray
    wv: np.ndarray
    x_max: float
    v_max: float
    x_face_density: np.ndarray
    v_face_density: np.ndarray

    @property
    def nx(self) -> int:
        return self.x_nodes.size

    @property
    def nv(self) -> int:
        return self.v_nodes.size

    @property
    def dx(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])

    @property
    def dv(self) -> float:
        return float(self.v_nodes[1] - self.v_nodes[0])

    @property
    def weights(self) -> np.ndarray:
        """Product weights for ``mu = mu_x (x) kappa``, shape ``(nx, nv)``."""
        return np.outer(self.wx, self.wv)


def _gibbs_weights(nodes: np.ndarray, energy, force):
    """Uniform-rule weights with semi-infinite end cells.

    Interior nodes get ``h exp(-E(x_i))``.  Each end cell stands for the whole
    tail beyond its inner interface, whose mass is ``exp(-E(face)) / |E'|`` to
    leading order; with that choice the solver's discrete force in the end
    cells equals ``E'`` exactly.
    """
    h = nodes[1] - nodes[0]
    faces = 0.5 * (nodes[1:] + nodes[:-1])
    face_dens = np.exp(-energy(faces))
    raw = h * np.exp(-energy(nodes))
    raw[0] = face_dens[0] / abs(float(force(nodes[0])))
    raw[-1] = face_dens[-1] / abs(float(force(nodes[-1])))
    z = float(np.sum(raw))
    return raw / z, face_dens / z


def make_grid(pot: Potential, nx: int = 256, nv: int = 256, v_max: float = V_MAX,
              x_max: float | None = None) -> Grid:
    """Build the phase grid for ``pot``; ``x_max`` defaults to the potential's radius."""
    if nx < 8 or nv < 8:
        raise ValueError("grid needs at least 8 nodes per axis")
    x_max = float(pot.x_max if x_max is None else x_max)
    x = np.linspace(-x_max, x_max, nx)
    v = np.linspace(-v_max, v_max, nv)
    wx, wxf = _gibbs_weights(x, pot.u, pot.du)
    wv, wvf = _gibbs_weights(v, lambda s: 0.5 * np.square(s), lambda s: s)
    return Grid(x, v, wx, wv, x_max, float(v_max), wxf, wvf)


@dataclass
class PhaseDensity:
    """Density ratio ``g`` with respect to ``mu`` on the grid, at time ``t``."""

    g: np.ndarray
    t: float = 0.0

    def mass(self, grid: Grid) -> float:
        return float(grid.wx @ self.g @ grid.wv)

    def copy(self) -> "PhaseDensity":
        return PhaseDensity(self.g.copy(), self.t)


@dataclass(frozen=True)
class SpatialFields:
    """Velocity moments of a density ratio, one value per x-node."""

    q: np.ndarray
    j: np.ndarray
    M: np.ndarray
    theta: np.ndarray
    m: np.ndarray


def project_moments(d: PhaseDensity, grid: Grid) -> SpatialFields:
    """Marginal ``q``, current ``j``, second moment ``M``, stress and mean velocity.

    Where ``q < Q_FLOOR`` the vacuum convention applies: ``j j / q`` and ``m``
    are set to zero.
    """
    g = d.g
    wv, v = grid.wv, grid.v_nodes
    q = g @ wv
    j = g @ (wv * v)
    M = g @ (wv * v * v)
    occupied = q >= Q_FLOOR
    m = np.where(occupied, j / np.where(occupied, q, 1.0), 0.0)
    theta = M - m * j - q
    return SpatialFields(q=q, j=j, M=M, theta=theta, m=m)


def fiber_entropies(g: np.ndarray, q: np.ndarray, wv: np.ndarray) -> np.ndarray:
    """``Ent_kappa(g_x / q_x)`` for every row, zero on vacuum rows."""
    occupied = q >= Q_FLOOR
    h = g / np.where(occupied, q, 1.0)[:, None]
    # h log h - h + 1 is nonnegative and cancellation-free near h = 1
    ent = (kl_div(h, 1.0) @ wv) + (h @ wv - 1.0)
    return np.where(occupied, ent, 0.0)


def conditional_entropy_profile(d: PhaseDensity, grid: Grid) -> np.ndarray:
    """Per-position relative entropy of the conditional velocity law."""
    return fiber_entropies(d.g, d.g @ grid.wv, grid.wv)


def write_snapshot(path: str | Path, grid: Grid, d: PhaseDensity) -> None:
    """Write ``d`` as a one-line ASCII header followed by raw float64 data.

    The header is ``<magic> nx=<Nx> nv=<Nv> x_max=<..> v_max=<..> t=<..>``;
    the body holds ``Nx * Nv`` little-endian doubles in row-major order with
    the position index outermost.
    """
    header = (
        f"{_MAGIC} nx={grid.nx} nv={grid.nv} x_max={grid.x_max!r} "
        f"v_max={grid.v_max!r} t={float(d.t)!r}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(d.g, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[dict, PhaseDensity]:
    """Read a snapshot written by :func:`write_snapshot`; returns ``(header, density)``."""
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii").split()
        if not line or line[0] != _MAGIC:
            raise ValueError(f"{path}: not a phase-density snapshot")
        header = dict(tok.split("=", 1) for tok in line[1:])
        meta = {
            "nx": int(header["nx"]),
            "nv": int(header["nv"]),
            "x_max": float(header["x_max"]),
            "v_max": float(header["v_max"]),
            "t": float(header["t"]),
        }
        body = np.frombuffer(fh.read(), dtype="<f8")
    if body.size != meta["nx"] * meta["nv"]:
        raise ValueError(f"{path}: expected {meta['nx'] * meta['nv']} values, found {body.size}")
    return meta, PhaseDensity(body.reshape(meta["nx"], meta["nv"]).copy(), meta["t"])
