"""``geostore`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .aggregates import EnergyReport
from .analogous import AnalogousModel, compare
from .assembly import PumpMode, write_triplets
from .config import ConfigError, RunConfig, load_config
from .grid import GridError, grid_from_steps
from .scenario import OriginalModel, TimeSeries, report, run, sweep
from .stepping import SolverFailure, StabilityViolation, check_stability, stability_limit

OUT_ENV = "GEOSTORE_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_NUMERICAL = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


class _Outputs:
    """Collects emitted files for the run index."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def json(self, name: str, data) -> None:
        self.path(name).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")

    def series(self, name: str, series: TimeSeries) -> None:
        if not all(np.all(np.isfinite(series[c])) for c in series.columns if c not in ("segment", "pump")):
            raise NumericalFailure(f"non-finite values in {name}")
        series.to_csv(self.path(name))

    def write_index(self, command: str, cfg: RunConfig, extra: dict) -> None:
        index = {
            "command": command,
            "config": str(cfg.source) if cfg.source else None,
            "h_x": cfg.h_x,
            "h_y": cfg.h_y,
            "tau": cfg.scheme.tau,
            "theta": cfg.scheme.theta,
            "files": sorted(set(self.files)),
            **extra,
        }
        (self.root / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")


def _report_dict(rep: EnergyReport) -> dict:
    return {**asdict(rep), "G_S": rep.G_S, "residual": rep.residual}


def _grid(cfg: RunConfig, geometry=None):
    return grid_from_steps(geometry or cfg.geometry, cfg.h_x, cfg.h_y)


def _announce(cfg: RunConfig, grid) -> None:
    tau_max = stability_limit(cfg.material, grid)
    print(f"tau_max = {tau_max:.6g} s  n = {grid.n}  n_bar = {grid.n_bar}  "
          f"(N_x = {grid.n_x}, N_y = {grid.n_y}, n_P = {grid.geometry.n_phx})")
    if cfg.scheme.theta == 0.0:
        check_stability(cfg.scheme.tau, cfg.material, grid)


def _cmd_validate(cfg: RunConfig, out: _Outputs | None, jobs: int) -> dict:
    grid = _grid(cfg)
    _announce(cfg, grid)
    print(f"schedule: {len(cfg.schedule.segments)} segments, horizon {cfg.schedule.horizon / 3600:g} h")
    if cfg.sweep:
        from .scenario import geometry_for
        for v in cfg.sweep.values:
            _grid(cfg, geometry_for(cfg.geometry, cfg.sweep.parameter, v))
        print(f"sweep: {cfg.sweep.parameter} over {len(cfg.sweep.values)} values")
    print("config OK")
    return {}


def _cmd_run(cfg: RunConfig, out: _Outputs, jobs: int) -> dict:
    grid = _grid(cfg)
    _announce(cfg, grid)
    res = run(cfg.schedule, grid, cfg.material, cfg.scheme)
    out.series("series.csv", res.series)
    for k, snap in enumerate(res.snapshots):
        p = out.path(f"snapshots/snapshot_{k:03d}.csv")
        snap.to_csv(p, grid)
        out.files.append(f"snapshots/snapshot_{k:03d}.json")
    rep = report(res, grid, cfg.material)
    out.json("report.json", _report_dict(rep))
    print(f"G_S = {rep.G_S:.6g} J  G_P = {rep.G_P:.6g} J  G_B = {rep.G_B:.6g} J  residual = {rep.residual:.4g} J")
    return {"report": _report_dict(rep)}


def _cmd_sweep(cfg: RunConfig, out: _Outputs, jobs: int) -> dict:
    if cfg.sweep is None:
        raise ConfigError("sweep", "missing (required by the sweep command)")
    from .scenario import geometry_for
    grids = [_grid(cfg, geometry_for(cfg.geometry, cfg.sweep.parameter, v)) for v in cfg.sweep.values]
    _announce(cfg, grids[0])
    entries = sweep(cfg.schedule, cfg.geometry, cfg.h_x, cfg.h_y, cfg.material, cfg.scheme,
                    cfg.sweep.parameter, cfg.sweep.values, jobs=jobs)
    rows = ["value,G_S,G_M,G_F,G_P,G_B,residual"]
    for k, e in enumerate(entries):
        label = "/".join(f"{c:g}" for c in e.value) if isinstance(e.value, tuple) else f"{e.value:g}"
        out.series(f"runs/{k:02d}_{label.replace('/', '-')}/series.csv", e.series)
        r = e.report
        rows.append(f"{label},{r.G_S:.17g},{r.G_M:.17g},{r.G_F:.17g},{r.G_P:.17g},{r.G_B:.17g},{r.residual:.17g}")
        print(f"{cfg.sweep.parameter} = {label}: G_S = {r.G_S:.6g} J")
    out.path("sweep.csv").write_text("\n".join(rows) + "\n")
    return {"parameter": cfg.sweep.parameter}


def _cmd_compare(cfg: RunConfig, out: _Outputs, jobs: int) -> dict:
    grid = _grid(cfg)
    _announce(cfg, grid)
    if cfg.scheme.theta != 0.0:
        raise ConfigError("--theta", "the analogous comparison runs explicitly (theta = 0)")
    model = OriginalModel(grid, cfg.material)
    original = run(cfg.schedule, grid, cfg.material, cfg.scheme, model)
    analog = run(cfg.schedule, grid, cfg.material, cfg.scheme, AnalogousModel(grid, cfg.material, original=model))
    errors = compare(original.series, analog.series)
    out.series("original.csv", original.series)
    out.series("analogous.csv", analog.series)
    out.series("comparison.csv", original.series.with_columns({k: v for k, v in errors.items() if k != "t"}))
    summary = {k: float(v.max()) for k, v in errors.items() if k != "t"}
    for k, v in summary.items():
        print(f"max {k} = {v:.4g}")
    return {"max_errors": summary}


def _cmd_export(cfg: RunConfig, out: _Outputs, jobs: int) -> dict:
    grid = _grid(cfg)
    _announce(cfg, grid)
    model = AnalogousModel(grid, cfg.material)
    asys = model.asys
    write_triplets(out.path("A_lti.txt"), asys.A_lti)
    write_triplets(out.path("B_lti.txt"), asys.B_lti)
    write_triplets(out.path("C_lift.txt"), asys.sys.C_lift)
    write_triplets(out.path("c_F.txt"), asys.c_F.row[None, :])
    ops = model.ops[PumpMode.ON]
    out.json("lti.json", {
        "n": grid.n, "n_bar": grid.n_bar, "m": 2,
        "inputs": ["Q_in", "Q_G"],
        "c_F_offset": asys.c_F.offset.tolist(),
        "C_in": asys.sys.C_in.tolist(),
        "c_S_offset": ops.c_S.offset.tolist(),
    })
    return {}


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "compare-analogous": _cmd_compare,
    "export-lti": _cmd_export,
    "validate": _cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geostore", description="Geothermal storage simulator")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="YAML configuration file")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<config>-<command>)")
    p.add_argument("--tau", type=float, help="time step in seconds")
    p.add_argument("--theta", type=float, help="theta-scheme parameter in [0, 1]")
    p.add_argument("--refine", type=float, help="divide h_x, h_y and tau by this factor")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    return p


def _out_dir(args, cfg: RunConfig) -> Path:
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUT_ENV, "geostore-out"))
    return root / f"{Path(args.config).stem}-{args.command}"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs", f"must be at least 1, got {args.jobs}")
        cfg = load_config(args.config).with_overrides(args.tau, args.theta, args.refine)
        out = None
        if args.command != "validate":
            root = _out_dir(args, cfg)
            try:
                root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ConfigError("--out", f"cannot create {root}: {exc.strerror}") from None
            out = _Outputs(root)
        with np.errstate(over="raise", invalid="raise"):
            extra = COMMANDS[args.command](cfg, out, args.jobs)
        if out is not None:
            out.write_index(args.command, cfg, extra)
            print(f"outputs written to {out.root}")
        return EXIT_OK
    except (ConfigError, GridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except (SolverFailure, NumericalFailure, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
