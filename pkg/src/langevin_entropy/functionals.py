"""Scalar functionals of a density ratio: entropy split, velocity Fisher information, current energy."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass

import numpy as np
from scipy.special import kl_div, logsumexp

from .grid import Q_FLOOR, Grid, PhaseDensity, SpatialFields, fiber_entropies

FISHER_CUTOFF = 1e-14
G_FLOOR = 1e-300


@dataclass(frozen=True)
class FunctionalReport:
    t: float
    ent: float
    ent_x: float
    ent_v: float
    i_v: float
    j_energy: float

    CSV_COLUMNS = ("t", "ent", "ent_x", "ent_v", "i_v", "j_energy")


def _ent_sum(f: np.ndarray, w: np.ndarray) -> float:
    # sum w f log f, written as sum w (f log f - f + 1) + (sum w f - 1)
    return float(np.sum(w * kl_div(f, 1.0)) + (np.sum(w * f) - np.sum(w)))


def entropy(d: PhaseDensity, grid: Grid) -> tuple[float, float, float]:
    """``(Ent, Ent_x, Ent_v)``; the first is computed directly, not as a sum."""
    g = d.g
    ent = _ent_sum(g, grid.weights)
    q = g @ grid.wv
    ent_x = _ent_sum(q, grid.wx)
    ent_v = float(grid.wx @ (q * fiber_entropies(g, q, grid.wv)))
    return ent, ent_x, ent_v


def fisher_v(d: PhaseDensity, grid: Grid) -> float:
    """``sum w |D_v g|^2 / g`` with second-order centered differences in ``v``."""
    g = d.g
    dg = np.gradient(g, grid.dv, axis=1, edge_order=2)
    integrand = np.where(g > FISHER_CUTOFF, dg * dg / np.maximum(g, G_FLOOR), 0.0)
    return float(grid.wx @ integrand @ grid.wv)


def current_energy(f: SpatialFields, grid: Grid) -> float:
    """``J = sum wx j^2 / q``; vacuum nodes contribute nothing."""
    occupied = f.q >= Q_FLOOR
    return float(grid.wx @ np.where(occupied, f.j * f.m, 0.0))


def functional_report(d: PhaseDensity, grid: Grid, f: SpatialFields | None = None) -> FunctionalReport:
    from .grid import project_moments

    f = project_moments(d, grid) if f is None else f
    ent, ent_x, ent_v = entropy(d, grid)
    return FunctionalReport(
        t=float(d.t), ent=ent, ent_x=ent_x, ent_v=ent_v,
        i_v=fisher_v(d, grid), j_energy=current_energy(f, grid),
    )


def entropy_variational_check(d: PhaseDensity, grid: Grid, phi: np.ndarray) -> float:
    """Worst slack of the Donsker-Varadhan bound over all fibers.

    Returns ``min_x [Ent(h_x) + log sum wv e^phi - sum wv phi h_x]``, which
    must be nonnegative.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != grid.v_nodes.shape:
        raise ValueError("phi must be given on the velocity nodes")
    if not np.all(np.isfinite(phi)) or phi.max() > 700.0:
        raise OverflowError("exp(phi) overflows; choose a bounded test function")
    q = d.g @ grid.wv
    occupied = q >= Q_FLOOR
    h = d.g[occupied] / q[occupied, None]
    log_mgf = float(logsumexp(phi, b=grid.wv))
    ent_h = fiber_entropies(d.g, q, grid.wv)[occupied]
    return float(np.min(ent_h + log_mgf - h @ (grid.wv * phi)))


def write_functionals_csv(path, reports: list[FunctionalReport], source: str | None = None) -> None:
    cols = list(FunctionalReport.CSV_COLUMNS) + (["source"] if source else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in reports:
            row = [repr(float(v)) for v in astuple(r)]
            w.writerow(row + ([source] if source else []))

