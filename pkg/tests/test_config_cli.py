import csv
import json

import pytest

from langevin_entropy import cli, config


def test_template_roundtrip():
    cfg = config.loads(config.TEMPLATE)
    assert cfg.mode == "certify" and cfg.gamma() == pytest.approx(2.0)
    again = config.loads(cfg.dumps())
    assert again == cfg and again.digest() == cfg.digest()


@pytest.mark.parametrize("text", [
    'gamma = 1.0',
    'mode = "explode"',
    'Gamma = -1.0',
    '[grid]\nnx = 4',
    '[time]\ndt = 0.003\nt_end = 0.01',
    '[potential]\nname = "quartic"',
    'mode = "ou-exact"\n[potential]\nname = "quartic"\nkappa = 1.0\nc4 = 0.25',
    '[grid]\nbogus = 1',
])
def test_invalid_configs(text):
    with pytest.raises(config.ConfigError):
        config.loads(text)


def _write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return str(path)


SMALL = """
Gamma = 1.0
[potential]
name = "quadratic"
rho = 1.0
[grid]
nx = 32
nv = 32
[time]
dt = 0.005
t_end = 0.1
snapshot_every = 2
[initial]
family = "gaussian"
mean = [0.5, 0.0]
cov = [[0.5, 0.0], [0.0, 1.0]]
"""


def test_certify_outputs_and_determinism(tmp_path):
    cfgp = _write(tmp_path, SMALL)
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["certify", "--config", cfgp, "--out", str(out)]) in (0, 4)
        runs.append(out)
    for f in ("functionals.csv", "transport.csv", "certificates.csv", "summary.json", "plot_data.csv"):
        assert (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes()
    man, other = (json.loads((r / "manifest.json").read_text()) for r in runs)
    assert man["config_sha256"] == other["config_sha256"]
    del man["config"]["out"], other["config"]["out"]
    assert man == other
    assert set(man["worst_margins"]) >= {"MAIN_DECAY", "C_DIFF_INEQ"}
    rows = list(csv.DictReader(open(runs[0] / "plot_data.csv")))
    assert len(rows) == 11 and "envelope" in rows[0]


def test_ou_exact_and_simulate(tmp_path):
    cfgp = _write(tmp_path, SMALL)
    assert cli.main(["ou-exact", "--config", cfgp, "--out", str(tmp_path / "ou")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "ou" / "functionals.csv")))
    assert rows[0]["source"] == "ou_exact"
    assert (tmp_path / "ou" / "decay.csv").exists()
    assert cli.main(["simulate", "--config", cfgp, "--out", str(tmp_path / "sim")]) == 0
    assert (tmp_path / "sim" / "final.bin").exists()


def test_sweep(tmp_path):
    cfgp = _write(tmp_path, SMALL.replace('family = "gaussian"', 'family = "gaussian_eq_units"'))
    assert cli.main(["sweep", "--config", cfgp, "--out", str(tmp_path / "sw"), "--workers", "2"]) == 0
    summary = json.loads((tmp_path / "sw" / "sweep.json").read_text())
    assert len(summary["points"]) == 3 and summary["theorem_rate_is_lower_bound"]


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["certify", "--config", _write(tmp_path, "gamma = 2.0")]) == cli.EXIT_CONFIG
    bad_dt = SMALL.replace("dt = 0.005", "dt = 0.1").replace("t_end = 0.1", "t_end = 0.2")
    assert cli.main(["simulate", "--config", _write(tmp_path, bad_dt),
                     "--out", str(tmp_path / "x")]) == cli.EXIT_SOLVER
    assert cli.main(["plot-data", str(tmp_path / "missing")]) == cli.EXIT_CONFIG
    assert cli.main(["config-template"]) == 0
    assert "[potential]" in capsys.readouterr().out
