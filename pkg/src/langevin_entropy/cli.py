"""Command-line front end: ``langevin-entropy <subcommand> --config run.toml``.

Exit codes: 0 success, 2 invalid configuration or missing input, 3 solver
fault, 4 certification failure (all outputs are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, certify, config, constants, initial, ou
from .functionals import FunctionalReport, functional_report, write_functionals_csv
from .grid import Grid, PhaseDensity, make_grid, project_moments, write_snapshot
from .potentials import Potential, make_potential
from .solver import SolverConfig, SolverError, evolve
from .transport import brenier_map, corrector, modified_entropy, monge_ampere_residual

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 2, 3, 4
OU_TOL = 1e-9
SWEEP_SAMPLES = 200

TRANSPORT_COLUMNS = ("t", "w2", "c_ot", "h_eps", "ma_residual")
PLOT_COLUMNS = ("t", "ent", "h_eps", "i_v", "w2", "c_ot", "envelope")


# ---------------------------------------------------------------------------
# building blocks


def build_potential(cfg: config.RunConfig) -> Potential:
    return make_potential(cfg.potential.name, **cfg.potential.params)


def build_grid(cfg: config.RunConfig, pot: Potential) -> Grid:
    g = cfg.grid
    return make_grid(pot, g.nx, g.nv, g.v_max, g.x_max)


def _eq_units(params: dict, rho: float) -> tuple[np.ndarray, np.ndarray]:
    scale = np.diag([1.0 / math.sqrt(rho), 1.0])
    mean = scale @ np.asarray(params.get("mean", [0.0, 0.0]), dtype=float)
    cov = scale @ np.asarray(params.get("cov", np.eye(2)), dtype=float) @ scale
    return mean, cov


def gaussian_initial(cfg: config.RunConfig, rho: float) -> ou.GaussianState:
    """The initial law as a Gaussian state (OU modes only)."""
    fam, prm = cfg.initial.family, cfg.initial.params
    if fam == "equilibrium":
        return ou.stationary(rho)
    if fam == "gaussian_eq_units":
        return ou.GaussianState(*_eq_units(prm, rho))
    return ou.GaussianState(np.asarray(prm["mean"], float), np.asarray(prm["cov"], float))


def build_initial(cfg: config.RunConfig, pot: Potential, grid: Grid) -> PhaseDensity:
    fam, prm = cfg.initial.family, dict(cfg.initial.params)
    try:
        if fam == "equilibrium":
            return initial.equilibrium(grid)
        if fam == "gaussian":
            return initial.gaussian(grid, pot, prm["mean"], prm["cov"])
        if fam == "gaussian_eq_units":
            return initial.gaussian(grid, pot, *_eq_units(prm, pot.rho))
        if fam == "product_gaussian":
            return initial.product_gaussian(grid, pot.rho, prm["a"], prm["m0"])
        if fam == "shifted_equilibrium":
            return initial.shifted_equilibrium(grid, pot, prm["x_shift"], prm.get("v_shift", 0.0))
        if fam == "random_smooth":
            rng = np.random.default_rng(cfg.seed)
            return initial.random_smooth(grid, rng, prm.get("modes", 4), prm.get("amplitude", 0.3))
    except KeyError as exc:
        raise config.ConfigError(f"initial.{exc.args[0]} is required for family {fam!r}") from None
    raise config.ConfigError(f"unknown initial family {fam!r}")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _write_manifest(out: Path, cfg: config.RunConfig, outputs: list[str], status: int,
                    extra: dict | None = None) -> None:
    manifest = {
        "tool": "langevin_entropy",
        "version": __version__,
        "mode": cfg.mode,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "outputs": sorted(outputs),
        "exit_status": status,
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    (out / "config.toml").write_text(cfg.dumps())


def _trajectory(cfg: config.RunConfig, pot: Potential, grid: Grid) -> list[PhaseDensity]:
    d0 = build_initial(cfg, pot, grid)
    scfg = SolverConfig(gamma=cfg.gamma(), dt=cfg.time.dt, t_end=cfg.time.t_end,
                        snapshot_every=cfg.time.snapshot_every)
    return evolve(d0, scfg, pot, grid)


# ---------------------------------------------------------------------------
# modes


def run_simulate(cfg: config.RunConfig, out: Path) -> tuple[int, dict]:
    pot = build_potential(cfg)
    grid = build_grid(cfg, pot)
    traj = _trajectory(cfg, pot, grid)
    eps = float(constants.theta(cfg.Gamma)) * math.sqrt(pot.rho)
    reps, rows = [], []
    for d in traj:
        f = project_moments(d, grid)
        rep = functional_report(d, grid, f)
        tr = brenier_map(f.q, pot, grid)
        c = corrector(f, tr, grid)
        reps.append(rep)
        rows.append((d.t, tr.w2, c, modified_entropy(rep.ent, c, eps),
                     monge_ampere_residual(f.q, tr, pot, grid)))
    write_functionals_csv(out / "functionals.csv", reps)
    _write_rows(out / "transport.csv", TRANSPORT_COLUMNS, rows)
    write_snapshot(out / "final.bin", grid, traj[-1])
    return EXIT_OK, {"outputs": ["functionals.csv", "transport.csv", "final.bin"]}


def run_certify(cfg: config.RunConfig, out: Path) -> tuple[int, dict]:
    pot = build_potential(cfg)
    grid = build_grid(cfg, pot)
    traj = _trajectory(cfg, pot, grid)
    p = certify.CertParams(cfg.Gamma, pot.rho)
    recs = certify.certify_trajectory(traj, pot, grid, p)
    write_functionals_csv(out / "functionals.csv", [r.functionals for r in recs])
    _write_rows(out / "transport.csv", TRANSPORT_COLUMNS,
                [(r.t, r.transport.w2, r.transport.c_ot, r.transport.h_eps, -r.margins["MA_RESID"])
                 for r in recs])
    certify.write_certificates_csv(out / "certificates.csv", recs)
    meta = {
        "tol_traj": recs[0].extras["tol_traj"],
        "gronwall_gap": certify.gronwall_check(recs, p),
        "t_map_monotone": all(r.transport.monotone for r in recs),
    }
    summary = certify.write_summary_json(out / "summary.json", recs, meta)
    status = EXIT_OK if summary["all_pass"] and meta["t_map_monotone"] else EXIT_CERT
    return status, {"outputs": ["functionals.csv", "transport.csv", "certificates.csv", "summary.json"],
                    "worst_margins": summary["worst"]}


def ou_curves(s0: ou.GaussianState, rho: float, Gamma: float, times) -> dict:
    """Exact functionals, corrector data and decay margins along the OU flow."""
    gamma = Gamma * math.sqrt(rho)
    eps = float(constants.theta(Gamma)) * math.sqrt(rho)
    states = ou.ou_trajectory(s0, rho, gamma, times)
    fs = [ou.ou_functionals(s, rho) for s in states]
    ent = np.array([f["ent"] for f in fs])
    margins = ou.main_decay_margins(times, ent, rho, Gamma)
    return {"t": np.asarray(times, float), "f": fs, "ent": ent, "margin": margins,
            "h_eps": ent + eps * np.array([f["c_ot"] for f in fs])}


def run_ou_exact(cfg: config.RunConfig, out: Path) -> tuple[int, dict]:
    rho = cfg.rho()
    n = int(round(cfg.time.t_end / (cfg.time.dt * cfg.time.snapshot_every)))
    times = np.linspace(0.0, cfg.time.t_end, n + 1)
    s0 = gaussian_initial(cfg, rho)
    cur = ou_curves(s0, rho, cfg.Gamma, times)
    reps = [FunctionalReport(t, f["ent"], f["ent_x"], f["ent_v"], f["i_v"], f["j_energy"])
            for t, f in zip(times, cur["f"])]
    write_functionals_csv(out / "functionals.csv", reps, source="ou_exact")
    _write_rows(out / "transport.csv", TRANSPORT_COLUMNS,
                [(t, f["w2"], f["c_ot"], h, 0.0) for t, f, h in zip(times, cur["f"], cur["h_eps"])])
    env = cur["ent"] + cur["margin"]
    _write_rows(out / "decay.csv", ("t", "ent", "envelope", "main_decay_margin"),
                zip(times, cur["ent"], env, cur["margin"]))
    worst = float(cur["margin"].min())
    status = EXIT_OK if worst >= -OU_TOL else EXIT_CERT
    return status, {"outputs": ["functionals.csv", "transport.csv", "decay.csv"],
                    "worst_margins": {"MAIN_DECAY": {"margin": worst, "tolerance": OU_TOL,
                                                     "pass": worst >= -OU_TOL}}}


def sweep_point(cfg_dict: dict, rho: float, Gamma: float) -> dict:
    """Fitted OU entropy decay rate for one ``(rho, Gamma)``; picklable for process pools."""
    cfg = config.from_dict({**cfg_dict, "mode": "ou-exact"})
    s0 = gaussian_initial(cfg, rho)
    w0, w1 = cfg.sweep.fit_window
    times = np.linspace(w0, w1, SWEEP_SAMPLES) / math.sqrt(rho)
    cur = ou_curves(s0, rho, Gamma, np.concatenate([[0.0], times]))
    rate, rms = ou.ou_rate_fit(times, cur["ent"][1:])
    lam = float(constants.rate(Gamma)) * math.sqrt(rho)
    return {"rho": rho, "Gamma": Gamma, "rate": rate, "rms": rms, "rate_over_sqrt_rho": rate / math.sqrt(rho),
            "theorem_rate": lam, "ent0": float(cur["ent"][0])}


def run_sweep(cfg: config.RunConfig, out: Path, workers: int = 1) -> tuple[int, dict]:
    gammas = cfg.sweep.Gamma or [cfg.Gamma]
    points = [(float(r), float(G)) for G in gammas for r in cfg.sweep.rho]
    raw = cfg.to_dict()
    raw.pop("mode")
    flat = config._flatten_params({**raw, "mode": "ou-exact"})
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep_point, [flat] * len(points), *zip(*points)))
    else:
        results = [sweep_point(flat, r, G) for r, G in points]
    table = {}
    ok = True
    for G in gammas:
        rows = [r for r in results if r["Gamma"] == G]
        ratios = np.array([r["rate_over_sqrt_rho"] for r in rows])
        c = float(ratios.mean())
        table[repr(G)] = {
            "c": c,
            "ratios": [float(x) for x in ratios],
            "normalized": [float(x / c) for x in ratios],
            "max_rel_spread": float(np.max(np.abs(ratios / c - 1.0))),
        }
        ok &= all(r["rate"] >= r["theorem_rate"] for r in rows)
    summary = {"points": results, "sqrt_rho_table": table, "theorem_rate_is_lower_bound": ok}
    with open(out / "sweep.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    _write_rows(out / "sweep_rates.csv", ("rho", "Gamma", "rate", "rate_over_sqrt_rho", "theorem_rate"),
                [(r["rho"], r["Gamma"], r["rate"], r["rate_over_sqrt_rho"], r["theorem_rate"]) for r in results])
    return (EXIT_OK if ok else EXIT_CERT), {"outputs": ["sweep.json", "sweep_rates.csv"]}


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(run_dir: str | Path) -> Path:
    """Write ``plot_data.csv``: the curves of a run plus the theorem envelope.

    Raises
    ------
    FileNotFoundError
        If ``run_dir`` holds no manifest.
    """
    run_dir = Path(run_dir)
    man_path = run_dir / "manifest.json"
    if not man_path.exists():
        raise FileNotFoundError(f"{man_path} not found")
    manifest = json.loads(man_path.read_text())
    cfg = config.from_dict(config._flatten_params(manifest["config"]))
    if cfg.mode == "sweep":
        rows = _read_csv(run_dir / "sweep_rates.csv")
        target = run_dir / "plot_data.csv"
        _write_rows(target, ("rho", "rate", "rate_over_sqrt_rho", "theorem_rate"),
                    [(r["rho"], r["rate"], r["rate_over_sqrt_rho"], r["theorem_rate"]) for r in rows])
        return target
    fun = _read_csv(run_dir / "functionals.csv")
    trn = _read_csv(run_dir / "transport.csv")
    if len(fun) != len(trn):
        raise ValueError("functionals.csv and transport.csv disagree on the snapshot count")
    t = np.array([float(r["t"]) for r in fun])
    ent = np.array([float(r["ent"]) for r in fun])
    rho = cfg.rho()
    env = float(constants.prefactor(cfg.Gamma)) * np.exp(
        -float(constants.rate(cfg.Gamma)) * math.sqrt(rho) * (t - t[0])) * ent[0]
    target = run_dir / "plot_data.csv"
    _write_rows(target, PLOT_COLUMNS,
                [(t[k], ent[k], trn[k]["h_eps"], fun[k]["i_v"], trn[k]["w2"], trn[k]["c_ot"], env[k])
                 for k in range(len(fun))])
    return target


# ---------------------------------------------------------------------------
# entry point

RUNNERS = {"simulate": run_simulate, "certify": run_certify, "ou-exact": run_ou_exact}


def run(cfg: config.RunConfig, out: str | Path, workers: int = 1) -> int:
    """Execute ``cfg`` into ``out``; returns the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "sweep":
        status, info = run_sweep(cfg, out, workers)
    else:
        status, info = RUNNERS[cfg.mode](cfg, out)
    outputs = info.pop("outputs") + ["plot_data.csv"]
    _write_manifest(out, cfg, outputs, status, info)
    emit_plot_data(out)
    return status


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="langevin-entropy", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "certify", "ou-exact", "sweep"):
        sp = sub.add_parser(name, help=f"run in {name} mode")
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, help="seed (overrides the config)")
    tp = sub.add_parser("config-template", help="print an annotated configuration")
    tp.add_argument("--out", help="write to this file instead of stdout")
    pp = sub.add_parser("plot-data", help="re-emit plot-ready columns for a finished run")
    pp.add_argument("run_dir")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "config-template":
        if args.out:
            Path(args.out).write_text(config.TEMPLATE)
        else:
            sys.stdout.write(config.TEMPLATE)
        return EXIT_OK
    if args.command == "plot-data":
        try:
            print(emit_plot_data(args.run_dir))
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    try:
        cfg = config.load(args.config)
        cfg = replace(cfg, mode=args.command)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out:
            cfg = replace(cfg, out=args.out)
        config.validate(cfg)
        if args.workers < 1:
            raise config.ConfigError("--workers must be >= 1")
        status = run(cfg, cfg.out, args.workers)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver fault: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if status == EXIT_CERT:
        print("certification failed beyond tolerance; see summary", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
