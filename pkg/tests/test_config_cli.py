import csv
import json
import os
import subprocess
import sys
import textwrap

import pytest

from vpfp import cli
from vpfp.config import ConfigError, config_hash, parse_config, sweep_cells
from vpfp.diagnostics import read_samples_csv

SMALL = """
tau = 0.5
delta = 20.0
t_end = 0.1
mode = "linear_vfp"
n_x = 8
n_v = 6
record_every = 5
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def test_defaults_and_types():
    cfg = parse_config("tau = 1.0")
    assert cfg["delta"] == 1.0 and cfg["n_x"] == 32 and cfg["n_v"] == 16
    assert cfg["mode"] == "nonlinear" and cfg["dealias"] is True
    assert parse_config('tau = 1.0\nmode = "linear_vfp"')["dealias"] is False
    assert config_hash(cfg) == config_hash(parse_config("tau = 1.0"))
    assert config_hash(cfg) != config_hash(parse_config("tau = 2.0"))


@pytest.mark.parametrize("text, msg", [
    ("tau = 1.0\nbogus = 3", "unknown config keys: bogus"),
    ("tau = -0.5", "tau must be positive"),
    ("delta = 1.0", "tau is required"),
    ('tau = "x"', "wrong type"),
    ("tau = 1.0\nn_x = 12.5", "wrong type"),
    ("tau = 1.0\nn_x = 6", "n_x"),
    ("tau = 1.0\nn_v = 2", "n_v"),
    ("tau = 1.0\ndt = 0.5", "stability bound"),
    ('tau = 1.0\nmode = "frozen"', "mode"),
    ("tau = 1.0\nepsilon = 1.5", "epsilon"),
    ("tau = 1.0\ninit.spatial_band = 16", "spatial_band"),
    ("tau = 1.0\n[sweep]\ntau = [1.0, -2.0]", "sweep.tau"),
    ("tau = [", "cannot parse"),
])
def test_config_rejections(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_inadmissible_beta_warns_but_runs(tmp_path):
    path = write(tmp_path, SMALL + "beta = [0.0, 2.0, 0.5]\n")
    with pytest.warns(UserWarning, match="violates"):
        rc = cli.main(["-q", "run", path, "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_OK


def test_sweep_cells_order():
    cfg = parse_config(SMALL + "[sweep]\ntau = [0.5, 1.0]\nseed = [0, 1]\n")
    cells = sweep_cells(cfg)
    assert [(c["tau"], c["seed"]) for c in cells] == [(0.5, 0), (0.5, 1), (1.0, 0), (1.0, 1)]


def test_run_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    rc = cli.main(["run", write(tmp_path, SMALL), "--out", str(out), "--plot-script",
                   "--save-state"])
    assert rc == cli.EXIT_OK
    assert "config: " in capsys.readouterr().out
    for name in ("functionals.csv", "macros_final.csv", "summary.json", "functionals.gp",
                 "final_state.txt", "manifest.json"):
        assert (out / name).exists()
    man = json.loads((out / "manifest.json").read_text())
    assert set(man) == {"config_hash", "seed", "version", "kernel_backend", "outputs",
                        "wall_time_s"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mass_drift"] < 1e-12


def test_zero_initial_data_gives_zero_functionals(tmp_path):
    out = tmp_path / "o"
    rc = cli.main(["-q", "run", write(tmp_path, SMALL + "init.norm = 0.0\n"), "--out", str(out)])
    assert rc == cli.EXIT_OK
    samples = read_samples_csv(out / "functionals.csv")
    assert len(samples) > 1
    assert all(s.norm_h2 == 0 and s.E_func == 0 and s.D_diss == 0 for s in samples)


def test_exit_codes(tmp_path):
    assert cli.main(["-q", "run", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 1
    assert cli.main(["-q", "run", write(tmp_path, "tau = 0.0"), "--out", str(tmp_path)]) == 1
    bad_pb = SMALL.replace("delta = 20.0", "delta = 0.02") + (
        'rho_star.kind = "cosine"\nrho_star.eps = 0.9\npb.max_iter = 2\n')
    assert cli.main(["-q", "run", write(tmp_path, bad_pb), "--out", str(tmp_path)]) == 2
    strict = write(tmp_path, cli.DIAGNOSE_DEFAULT.replace("diagnose.states = 5",
                                                          "diagnose.states = 1\ndiagnose.tol = 1e-30"))
    assert cli.main(["-q", "diagnose", strict, "--out", str(tmp_path / "d")]) == 3


def test_diagnose_default_passes(tmp_path):
    out = tmp_path / "d"
    assert cli.main(["-q", "diagnose", "--out", str(out)]) == cli.EXIT_OK
    rep = json.loads((out / "diagnose.json").read_text())
    assert rep["all_pass"]
    assert len([c for c in rep["checks"] if c["check"].startswith("energy_identity")]) == 4


def test_sweep_isolates_failed_cells(tmp_path):
    text = SMALL.replace("delta = 20.0", "delta = 1.0") + (
        'rho_star.kind = "cosine"\nrho_star.eps = 0.9\npb.max_iter = 4\n'
        "[sweep]\ndelta = [1.0, 0.02]\n")
    out = tmp_path / "s"
    assert cli.main(["-q", "sweep", write(tmp_path, text), "--out", str(out)]) == cli.EXIT_OK
    rows = list(csv.DictReader(open(out / "sweep_table.csv")))
    assert [r["status"] for r in rows] == ["ok", "failed"]
    summary = json.loads((out / "sweep_summary.json").read_text())
    assert summary["n_failed"] == 1 and "residual" in summary["cells"][1]["error"]


def test_sweep_fitted_rates(tmp_path):
    text = """
    tau = 1.0
    delta = 20.0
    t_end = 2.0
    mode = "linear_vfp"
    n_x = 8
    n_v = 8
    record_every = 10
    [sweep]
    tau = [0.1, 1.0, 10.0]
    """
    out = tmp_path / "s"
    assert cli.main(["-q", "sweep", write(tmp_path, text), "--out", str(out)]) == cli.EXIT_OK
    rows = list(csv.DictReader(open(out / "sweep_table.csv")))
    assert len(rows) == 3
    assert all(r["status"] == "ok" and float(r["fitted_rate"]) > 0 for r in rows)


def test_sweep_is_deterministic_across_workers(tmp_path):
    text = SMALL + "[sweep]\ntau = [0.5, 1.0]\nseed = [0, 1]\n"
    path = write(tmp_path, text)
    outs = []
    for workers in ("1", "2"):
        out = tmp_path / f"w{workers}"
        env = dict(os.environ, VPFP_WORKERS=workers)
        r = subprocess.run([sys.executable, "-m", "vpfp.cli", "-q", "sweep", path, "--out",
                            str(out)], env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append(out)
    for i in range(4):
        for name in ("functionals.csv", "macros_final.csv", "summary.json"):
            a = (outs[0] / f"cell_{i:03d}" / name).read_bytes()
            b = (outs[1] / f"cell_{i:03d}" / name).read_bytes()
            assert a == b
    assert (outs[0] / "sweep_table.csv").read_bytes() == (outs[1] / "sweep_table.csv").read_bytes()


def test_equilibrium_and_asymptotics_commands(tmp_path):
    eq_cfg = write(tmp_path, 'tau = 1.0\nn_x = 16\nrho_star.kind = "cosine"\nrho_star.eps = 0.3\n')
    out = tmp_path / "e"
    assert cli.main(["-q", "equilibrium", eq_cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "equilibrium.json").read_text())
    assert summary["bounds_hold"] and abs(summary["mass"] - 1) < 1e-8
    text = """
    tau = 0.2
    delta = 5.0
    n_x = 8
    n_v = 6
    init.spatial_band = 1
    [asymptotics]
    regime = "v"
    tau_list = [0.2, 0.1]
    horizon = 0.2
    record_ds = 0.05
    window = [0.0, 0.2]
    """
    out = tmp_path / "a"
    assert cli.main(["-q", "asymptotics", write(tmp_path, text, "a.toml"), "--out", str(out)]) == 0
    rep = json.loads((out / "regime_report.json").read_text())
    assert rep["regime"] == "v" and rep["monotone"]
    bad = write(tmp_path, text.replace('"v"', '"vi"'), "b.toml")
    assert cli.main(["-q", "asymptotics", bad, "--out", str(out)]) == 1


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "vpfp.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "diagnose" in r.stdout
