"""Configuration-driven command surface.

Usage: ``fastslow COMMAND --config PATH [--set key=value ...] [--out DIR]
[--seed N] [--threads N]``.  The config file is TOML with tables ``[system]``,
``[estimator]``, and ``[study]``; overrides apply after file values.  A seed
must be present (file or flag): there is no silent nondeterminism.

Exit codes: 0 success, 1 numerical failure (partial artifacts retained and
marked incomplete in the manifest), 2 configuration error.
"""

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import studies
from .ergodic import EstimatorError
from .homogenize import (EstimatorParams, coefficients_from_cell,
                         solve_cell_problem_1d, tabulate_model)
from .integrate import IntegrationError, SeedSpec, integrate_fast_slow, integrate_frozen_fast
from .io import file_sha256, trajectory_to_binary, trajectory_to_csv, write_csv
from .systems import SystemError, system_from_config

COMMANDS = ("simulate", "frozen", "estimate-coefficients", "cell-oracle",
            "lorenz-study", "heat-study", "convergence")


class ConfigError(ValueError):
    pass


@dataclass(eq=False)
class RunConfig:
    command: str
    seed: SeedSpec
    out_dir: Path
    system: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)
    threads: int = 1

    def build_system(self):
        if not self.system:
            raise ConfigError("system: table required for this command")
        try:
            return system_from_config(self.system)
        except SystemError as exc:
            raise ConfigError(f"system: {exc}") from exc

    def estimator_params(self, **defaults) -> EstimatorParams:
        kw = dict(defaults)
        kw.update(self.estimator)
        kw["seed"] = self.seed
        try:
            return EstimatorParams(**kw)
        except (TypeError, EstimatorError) as exc:
            raise ConfigError(f"estimator: {exc}") from exc


def _parse_override(item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, raw = item.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(cfg: dict, key: str, value):
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-table value")
    node[parts[-1]] = value


def parse_config(path, overrides=(), command: str = None, out: str = None,
                 seed: int = None, threads: int = None) -> RunConfig:
    """Load and validate a run configuration; overrides apply after the file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    for item in overrides:
        key, value = _parse_override(item)
        _apply_override(cfg, key, value)

    cmd = command or cfg.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command: expected one of {COMMANDS}, got {cmd!r}")

    if seed is not None:
        cfg["seed"] = seed
    if "seed" not in cfg:
        raise ConfigError("seed: required field (set it in the config or pass --seed)")
    try:
        seed_spec = SeedSpec(int(cfg["seed"]), int(cfg.get("stream", 0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed: {exc}") from exc

    out_dir = Path(out or cfg.get("out", "runs/" + cmd))
    threads_val = threads if threads is not None else int(cfg.get("threads", 1))
    if threads_val < 1:
        raise ConfigError("threads: must be at least 1")

    for table in ("system", "estimator", "study"):
        if table in cfg and not isinstance(cfg[table], dict):
            raise ConfigError(f"{table}: must be a table")

    return RunConfig(command=cmd, seed=seed_spec, out_dir=out_dir,
                     system=dict(cfg.get("system", {})),
                     estimator=dict(cfg.get("estimator", {})),
                     study=dict(cfg.get("study", {})), threads=threads_val)


# ---------------------------------------------------------------------------
# command bodies (each returns the list of files it wrote)
# ---------------------------------------------------------------------------

def _cmd_simulate(config: RunConfig):
    system = config.build_system()
    st = config.study
    xi = np.asarray(st.get("xi", np.zeros(system.d)), dtype=float)
    eta = np.asarray(st.get("eta", system.reference_eta), dtype=float)
    traj = integrate_fast_slow(
        system, xi, eta, float(st.get("T", 1.0)),
        float(st.get("dt", system.epsilon ** 2 / 20.0)), config.seed,
        noise_at_order_one=bool(st.get("noise_at_order_one", False)),
        record_stride=int(st.get("record_stride", 1)))
    trajectory_to_csv(traj, config.out_dir / "trajectory.csv")
    trajectory_to_binary(traj, config.out_dir / "trajectory.bin")
    return ["trajectory.csv", "trajectory.bin"]


def _cmd_frozen(config: RunConfig):
    system = config.build_system()
    st = config.study
    x = np.asarray(st.get("x", np.zeros(system.d)), dtype=float)
    y0 = np.asarray(st.get("y0", system.reference_eta), dtype=float)
    traj = integrate_frozen_fast(
        system, x, y0, float(st.get("delta", system.delta)),
        float(st.get("T", 10.0)), float(st.get("dt", 1e-3)), config.seed,
        record_stride=int(st.get("record_stride", 1)))
    trajectory_to_csv(traj, config.out_dir / "frozen.csv")
    trajectory_to_binary(traj, config.out_dir / "frozen.bin")
    return ["frozen.csv", "frozen.bin"]


def _json_safe(obj, max_len=64):
    if isinstance(obj, dict):
        return {k: _json_safe(v, max_len) for k, v in obj.items()
                if not (isinstance(v, np.ndarray) and v.size > max_len)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v, max_len) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def _cmd_estimate(config: RunConfig):
    system = config.build_system()
    st = config.study
    params = config.estimator_params()
    x_grid = np.asarray(st.get("x_grid", [0.0]), dtype=float).reshape(-1, system.d)
    delta = float(st.get("delta", system.delta))
    coeffs = tabulate_model(system, x_grid, delta, params)
    d = system.d
    header = ([f"x_{i+1}" for i in range(d)] + [f"F_{i+1}" for i in range(d)]
              + [f"A0_{i+1}{j+1}" for i in range(d) for j in range(d)]
              + [f"A_{i+1}{j+1}" for i in range(d) for j in range(d)]
              + ["tail_flag"])
    rows = []
    for i in range(len(x_grid)):
        diag = coeffs.diagnostics[i].get("diffusion", {})
        rows.append(list(coeffs.x_grid[i]) + list(coeffs.F_values[i])
                    + list(coeffs.A0_values[i].ravel())
                    + list(coeffs.A_values[i].ravel())
                    + [int(diag.get("non_summable", False))])
    write_csv(config.out_dir / "coefficients.csv", header, rows)
    with open(config.out_dir / "diagnostics.json", "w") as fh:
        json.dump(_json_safe({"points": coeffs.diagnostics,
                              "ok": coeffs.ok.tolist()}), fh, indent=2)
    return ["coefficients.csv", "diagnostics.json"]


def _cmd_cell_oracle(config: RunConfig):
    system = config.build_system()
    st = config.study
    x = float(st.get("x", 0.0))
    delta = float(st.get("delta", system.delta))
    grid_size = int(st.get("grid_size", 2048))
    cell = solve_cell_problem_1d(system, x, delta, grid_size)
    F, A0 = coefficients_from_cell(system, x, cell)
    write_csv(config.out_dir / "cell.csv", ["y", "Phi", "rho"],
              zip(cell.grid, cell.Phi, cell.rho))
    with open(config.out_dir / "cell_summary.json", "w") as fh:
        json.dump({"x": x, "delta": delta, "grid_size": grid_size,
                   "F_delta": F, "A0_delta": A0}, fh, indent=2, sort_keys=True)
    return ["cell.csv", "cell_summary.json"]


def _cmd_lorenz_study(config: RunConfig):
    st = dict(config.study)
    res = studies.lorenz_study(config.out_dir, config.seed,
                               N=int(st.get("N", 1000)),
                               epsilons=tuple(st.get("epsilons", (0.8, 0.2))),
                               T=float(st.get("T", 10.0)),
                               t_spacing=float(st.get("t_spacing", 0.05)),
                               fast_step=float(st.get("fast_step", 1e-3)),
                               sample_path_deltas=tuple(st.get("sample_path_deltas", (0.0, 0.5))),
                               sigma2=float(st.get("sigma2", studies.LORENZ_SIGMA2)),
                               bins=int(st.get("bins", 40)),
                               ks_times=tuple(st.get("ks_times", (2.5, 5.0, 10.0))),
                               n_jobs=config.threads)
    return res["files"]


def _cmd_heat_study(config: RunConfig):
    st = dict(config.study)
    est = dict(config.estimator)
    res = studies.heat_study(config.out_dir, config.seed,
                             delta=float(st.get("delta", 1.0)),
                             x_grid=tuple(st.get("x_grid", (-2.0, -1.0, 0.0, 1.0, 2.0))),
                             T_birkhoff=float(est.get("T_birkhoff", 500.0)),
                             dt=float(est.get("dt", 1e-3)),
                             t_max=float(est.get("t_max", 0.8)),
                             n_lags=int(est.get("n_lags", 81)),
                             noise_replicas=int(est.get("noise_replicas", 16)),
                             n_origins=int(est.get("n_origins", 4000)),
                             cell_grid=int(st.get("cell_grid", 2048)))
    return res["files"]


def _cmd_convergence(config: RunConfig):
    st = dict(config.study)
    t_grid = st.get("t_grid")
    res = studies.convergence_study(
        config.out_dir, config.seed,
        fixture=st.get("fixture", "heat_torus"),
        epsilons=tuple(st.get("epsilons", (0.8, 0.4, 0.2))),
        t_grid=None if t_grid is None else np.asarray(t_grid, dtype=float),
        N=int(st.get("N", 256)),
        centers=tuple(st.get("centers", (0.0, 1.0))),
        sigma2=st.get("sigma2"),
        fast_step=float(st.get("fast_step", 1e-3)))
    return res["files"]


_BODIES = {
    "simulate": _cmd_simulate,
    "frozen": _cmd_frozen,
    "estimate-coefficients": _cmd_estimate,
    "cell-oracle": _cmd_cell_oracle,
    "lorenz-study": _cmd_lorenz_study,
    "heat-study": _cmd_heat_study,
    "convergence": _cmd_convergence,
}


def run(config: RunConfig):
    """Execute a validated run; returns (exit_code, manifest dict)."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    if not config.out_dir.is_dir():
        raise ConfigError(f"out: {config.out_dir} is not a writable directory")
    manifest = {"command": config.command, "master_seed": config.seed.master,
                "stream": config.seed.stream, "complete": False, "files": {}}
    status = 0
    try:
        files = _BODIES[config.command](config)
        manifest["complete"] = True
    except (EstimatorError, IntegrationError, FloatingPointError, SystemError) as exc:
        manifest["error"] = str(exc)
        files = [p.name for p in config.out_dir.iterdir() if p.name != "manifest.json"]
        status = 1
    for name in sorted(files):
        path = config.out_dir / name
        if path.exists():
            manifest["files"][name] = file_sha256(path)
    with open(config.out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return status, manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fastslow",
        description="Fast-slow simulation and homogenized-coefficient estimation")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="TOML configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for ensemble runs")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config, args.overrides, command=args.command,
                              out=args.out, seed=args.seed, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            status, manifest = run(config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
    if status != 0:
        print(f"numerical failure: {manifest.get('error')}", file=sys.stderr)
    else:
        print(f"wrote {len(manifest['files'])} artifacts to {config.out_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
