import json
from pathlib import Path

import numpy as np
import pytest

from fastslow.cli import ConfigError, main, parse_config, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, body, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(body)
    return p


MINIMAL_HEAT = """
seed = 42
[system]
fixture = "heat_torus"
delta = 1.0
[study]
T = 2.0
dt = 1e-3
"""


def test_parse_minimal_config(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL_HEAT), command="frozen",
                       out=str(tmp_path / "out"))
    assert cfg.seed.master == 42
    assert cfg.system["fixture"] == "heat_torus"
    assert cfg.command == "frozen"


def test_missing_seed_names_field(tmp_path):
    body = '[system]\nfixture = "heat_torus"\n'
    with pytest.raises(ConfigError, match="seed"):
        parse_config(_write(tmp_path, body), command="frozen")


def test_override_precedence(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL_HEAT), command="frozen",
                       overrides=["system.epsilon=0.2", "study.T=5.0"])
    assert cfg.system["epsilon"] == 0.2
    assert cfg.study["T"] == 5.0


def test_parse_failure(tmp_path):
    with pytest.raises(ConfigError, match="parse"):
        parse_config(_write(tmp_path, "seed = [unclosed"), command="frozen")
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(tmp_path / "missing.toml", command="frozen")


def test_cli_exit_codes(tmp_path, capsys):
    cfg = _write(tmp_path, MINIMAL_HEAT)
    # config error: bad override path
    assert main(["frozen", "--config", str(tmp_path / "nope.toml")]) == 2
    # numerical failure: stability guard rejects dt for the coupled command
    code = main(["simulate", "--config", str(cfg),
                 "--set", "system.epsilon=0.1", "--set", "study.dt=0.01",
                 "--out", str(tmp_path / "bad")])
    assert code == 1
    manifest = json.loads((tmp_path / "bad" / "manifest.json").read_text())
    assert manifest["complete"] is False
    assert "dt too large" in manifest["error"]
    # success
    assert main(["frozen", "--config", str(cfg),
                 "--out", str(tmp_path / "ok")]) == 0


def test_manifest_lists_every_artifact(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL_HEAT), command="frozen",
                       out=str(tmp_path / "out"))
    status, manifest = run(cfg)
    assert status == 0
    assert manifest["complete"]
    emitted = {p.name for p in (tmp_path / "out").iterdir()} - {"manifest.json"}
    assert set(manifest["files"]) == emitted


def test_double_run_hash_equality(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    cfg_path = _write(tmp_path, MINIMAL_HEAT)
    m1 = run(parse_config(cfg_path, command="frozen", out=str(out1)))[1]
    m2 = run(parse_config(cfg_path, command="frozen", out=str(out2)))[1]
    assert m1["files"] == m2["files"]


def test_simulate_command(tmp_path):
    body = """
seed = 7
[system]
fixture = "lorenz"
epsilon = 0.5
[study]
T = 1.0
dt = 1e-3
record_stride = 10
"""
    cfg = parse_config(_write(tmp_path, body), command="simulate",
                       out=str(tmp_path / "out"))
    status, manifest = run(cfg)
    assert status == 0
    header = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,x_1,y_1,y_2,y_3"


def test_cell_oracle_command(tmp_path):
    body = """
seed = 3
[system]
fixture = "heat_torus"
delta = 1.0
[study]
x = 0.0
grid_size = 512
"""
    cfg = parse_config(_write(tmp_path, body), command="cell-oracle",
                       out=str(tmp_path / "out"))
    status, _ = run(cfg)
    assert status == 0
    summary = json.loads((tmp_path / "out" / "cell_summary.json").read_text())
    assert summary["A0_delta"] == pytest.approx(1.0 / (2 * np.pi ** 2), rel=1e-3)


def test_estimate_coefficients_command(tmp_path):
    body = """
seed = 11
[system]
fixture = "heat_torus"
delta = 1.0
[estimator]
T_birkhoff = 60.0
t_max = 0.6
n_lags = 31
noise_replicas = 4
n_origins = 400
[study]
x_grid = [0.0, 1.0]
"""
    cfg = parse_config(_write(tmp_path, body), command="estimate-coefficients",
                       out=str(tmp_path / "out"))
    status, manifest = run(cfg)
    assert status == 0
    lines = (tmp_path / "out" / "coefficients.csv").read_text().splitlines()
    assert lines[0] == "x_1,F_1,A0_11,A_11,tail_flag"
    assert len(lines) == 3
    diag = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
    assert diag["ok"] == [True, True]


def test_lorenz_study_small_double_run(tmp_path):
    cfg_path = CONFIGS / "lorenz_study.toml"
    overrides = ["study.N=32", "study.T=2.0", "study.ks_times=[1.0, 2.0]",
                 "study.fast_step=2e-3"]
    m1 = run(parse_config(cfg_path, overrides, command="lorenz-study",
                          out=str(tmp_path / "a")))[1]
    m2 = run(parse_config(cfg_path, overrides, command="lorenz-study",
                          out=str(tmp_path / "b")))[1]
    assert m1["complete"] and m1["files"] == m2["files"]
    names = set(m1["files"])
    assert {"samplepaths.csv", "ensemble_mean.csv", "histogram_t10.csv",
            "convergence.csv", "histogram_t10_overlay.csv"} <= names
    head = (tmp_path / "a" / "ensemble_mean.csv").read_text().splitlines()[0]
    assert head == "epsilon,t,mean,stderr,theory"
    head = (tmp_path / "a" / "histogram_t10.csv").read_text().splitlines()[0]
    assert head == "epsilon,bin_left,bin_right,mass,analytic_pdf"


def test_heat_study_small(tmp_path):
    cfg_path = CONFIGS / "heat_study.toml"
    overrides = ["estimator.T_birkhoff=60.0", "estimator.n_origins=500",
                 "estimator.noise_replicas=4", "study.x_grid=[0.0]",
                 "study.cell_grid=512"]
    status, manifest = run(parse_config(cfg_path, overrides,
                                        command="heat-study",
                                        out=str(tmp_path / "h")))
    assert status == 0
    summary = json.loads((tmp_path / "h" / "heat_summary.json").read_text())
    assert summary["A0_cell"][0] == pytest.approx(1 / (2 * np.pi ** 2), rel=1e-3)
    assert summary["A0"][0] == pytest.approx(1 / (2 * np.pi ** 2), rel=0.35)
    head = (tmp_path / "h" / "coefficients.csv").read_text().splitlines()[0]
    assert head == "x,F,F_stderr,A0,A,F_cell,A0_cell,tail_flag"


def test_convergence_command_small(tmp_path):
    cfg_path = CONFIGS / "convergence.toml"
    overrides = ["study.N=32", "study.epsilons=[0.8, 0.4]"]
    status, manifest = run(parse_config(cfg_path, overrides,
                                        command="convergence",
                                        out=str(tmp_path / "c")))
    assert status == 0
    head = (tmp_path / "c" / "convergence_table.csv").read_text().splitlines()[0]
    assert head == "epsilon,t,observable,error,stderr"
