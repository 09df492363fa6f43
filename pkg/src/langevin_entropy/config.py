"""Typed run configuration, read from and written to TOML."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from .potentials import POTENTIALS

MODES = ("simulate", "certify", "ou-exact", "sweep")
INITIAL_FAMILIES = ("equilibrium", "gaussian", "gaussian_eq_units", "product_gaussian",
                    "shifted_equilibrium", "random_smooth")


class ConfigError(ValueError):
    """Raised for any malformed or out-of-range configuration."""


@dataclass
class PotentialSpec:
    name: str = "quadratic"
    params: dict = field(default_factory=lambda: {"rho": 4.0})


@dataclass
class GridSpec:
    nx: int = 256
    nv: int = 256
    v_max: float = 8.0
    x_max: float | None = None


@dataclass
class TimeSpec:
    dt: float = 1e-3
    t_end: float = 2.0
    snapshot_every: int = 10


@dataclass
class InitialSpec:
    family: str = "gaussian"
    params: dict = field(default_factory=lambda: {"mean": [1.0, 0.0], "cov": [[0.25, 0.0], [0.0, 1.0]]})


@dataclass
class SweepSpec:
    rho: list = field(default_factory=lambda: [1.0, 4.0, 16.0])
    Gamma: list = field(default_factory=list)
    fit_window: list = field(default_factory=lambda: [1.0, 4.0])


@dataclass
class RunConfig:
    """Everything a run needs.  ``gamma`` is always derived as ``Gamma sqrt(rho)``."""

    mode: str = "certify"
    Gamma: float = 1.0
    seed: int = 0
    out: str = "run"
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["grid"]["x_max"] is None:
            del d["grid"]["x_max"]
        return d

    def dumps(self) -> str:
        return tomli_w.dumps(_flatten_params(self.to_dict()))

    def digest(self) -> str:
        """SHA-256 of the canonical settings; the output location is not part of it."""
        d = self.to_dict()
        del d["out"]
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def rho(self) -> float:
        from .potentials import make_potential

        return make_potential(self.potential.name, **self.potential.params).rho

    def gamma(self) -> float:
        return self.Gamma * math.sqrt(self.rho())


def _flatten_params(d: dict) -> dict:
    # [potential] and [initial] tables carry their parameters inline
    out = dict(d)
    for key in ("potential", "initial"):
        sec = dict(out[key])
        params = sec.pop("params")
        sec.update(params)
        out[key] = sec
    return out


def _take(section: dict, cls, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")
    return cls(**section)


def from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    if "gamma" in raw:
        raise ConfigError("gamma is derived as Gamma * sqrt(rho); set Gamma instead")
    pot = dict(raw.pop("potential", {}))
    pot_name = pot.pop("name", "quadratic")
    init = dict(raw.pop("initial", {}))
    family = init.pop("family", "gaussian")
    try:
        cfg = RunConfig(
            potential=PotentialSpec(pot_name, pot or PotentialSpec().params),
            grid=_take(raw.pop("grid", {}), GridSpec, "grid"),
            time=_take(raw.pop("time", {}), TimeSpec, "time"),
            initial=InitialSpec(family, init),
            sweep=_take(raw.pop("sweep", {}), SweepSpec, "sweep"),
            **raw,
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    validate(cfg)
    return cfg


def load(path: str | Path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return from_dict(raw)


def loads(text: str) -> RunConfig:
    try:
        return from_dict(tomli.loads(text))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc)) from None


def validate(cfg: RunConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.mode in MODES, f"mode must be one of {MODES}")
    need(isinstance(cfg.Gamma, (int, float)) and cfg.Gamma > 0, "Gamma must be positive")
    need(isinstance(cfg.seed, int) and cfg.seed >= 0, "seed must be a nonnegative integer")
    need(cfg.potential.name in POTENTIALS, f"potential.name must be one of {sorted(POTENTIALS)}")
    try:
        cfg.rho()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"potential: {exc}") from None
    g = cfg.grid
    need(isinstance(g.nx, int) and isinstance(g.nv, int) and g.nx >= 8 and g.nv >= 8,
         "grid.nx and grid.nv must be integers >= 8")
    need(g.v_max > 0, "grid.v_max must be positive")
    need(g.x_max is None or g.x_max > 0, "grid.x_max must be positive")
    t = cfg.time
    need(t.dt > 0 and t.t_end > 0, "time.dt and time.t_end must be positive")
    need(isinstance(t.snapshot_every, int) and t.snapshot_every >= 1, "time.snapshot_every must be >= 1")
    n = t.t_end / t.dt
    need(abs(n - round(n)) < 1e-9 * max(1.0, n), "time.t_end must be a multiple of time.dt")
    need(cfg.initial.family in INITIAL_FAMILIES, f"initial.family must be one of {INITIAL_FAMILIES}")
    s = cfg.sweep
    need(all(r > 0 for r in s.rho), "sweep.rho entries must be positive")
    need(all(x > 0 for x in s.Gamma), "sweep.Gamma entries must be positive")
    need(len(s.fit_window) == 2 and 0 <= s.fit_window[0] < s.fit_window[1],
         "sweep.fit_window must be [start, stop] with start < stop")
    if cfg.mode in ("ou-exact", "sweep"):
        need(cfg.potential.name == "quadratic", "ou-exact and sweep need the quadratic potential")
        need(cfg.initial.family in ("gaussian", "gaussian_eq_units", "equilibrium"),
             "ou-exact and sweep need a Gaussian initial law")


TEMPLATE = """\
# Run configuration.  Symbols follow the usual kinetic Langevin notation.
mode = "certify"          # simulate | certify | ou-exact | sweep
Gamma = 1.0               # Gamma: friction ratio; the friction is gamma = Gamma * sqrt(rho)
seed = 0                  # seed for randomized initial data
out = "run"               # output directory (overridden by --out)

[potential]
name = "quadratic"        # quadratic: U = rho x^2 / 2 | quartic: U = kappa x^2 / 2 + c4 x^4
rho = 4.0                 # rho: log-Sobolev constant of mu_x (quartic: kappa, c4 instead)

[grid]
nx = 256                  # N_x: position nodes
nv = 256                  # N_v: velocity nodes
v_max = 8.0               # velocity box [-v_max, v_max]
# x_max = 4.0             # position box; defaults to where exp(-U) < 1e-16

[time]
dt = 0.001                # time step of the Strang splitting
t_end = 2.0               # final time
snapshot_every = 10       # steps between recorded snapshots

[initial]
family = "gaussian"       # equilibrium | gaussian | gaussian_eq_units | product_gaussian | shifted_equilibrium | random_smooth
mean = [1.0, 0.0]         # (x, v) mean of the initial Gaussian law
cov = [[0.25, 0.0], [0.0, 1.0]]

[sweep]
rho = [1.0, 4.0, 16.0]    # rho values for mode = "sweep"
Gamma = []                # optional Gamma values; empty means [Gamma]
fit_window = [1.0, 4.0]   # rate-fit window in units of 1 / sqrt(rho)
"""
