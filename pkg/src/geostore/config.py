"""YAML run configuration.

Layout (all keys optional unless noted)::

    geometry:      {l_x, l_y, l_z, phx: {diameter, centers: [..]}}
    material:
      medium:      {rho, cp, kappa}
      fluid:       {rho, cp, kappa}
    operation:     {velocity, lambda_G, q_ground, initial_temperature}
    discretization: {h_x, h_y, tau, theta, stride, snapshot_hours: [..]}
    schedule:      [{kind, hours | seconds, q_in, q_ground}, ...]   # required
    sweep:         {parameter, values: [..]}
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import yaml

from .assembly import MaterialParams
from .grid import PhxSpec, StorageGeometry
from .scenario import HOUR, Schedule, Segment, SegmentKind, SWEEP_PARAMETERS
from .stepping import SchemeConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class RunConfig:
    geometry: StorageGeometry
    material: MaterialParams
    h_x: float
    h_y: float
    scheme: SchemeConfig
    schedule: Schedule
    sweep: SweepSpec | None = None
    source: Path | None = None

    def with_overrides(self, tau: float | None = None, theta: float | None = None,
                       refine: float | None = None) -> "RunConfig":
        cfg = self
        if refine is not None:
            if not refine > 0:
                raise ConfigError("--refine", f"factor must be positive, got {refine}")
            # tau shrinks with h so that a refined explicit run stays comparable
            cfg = replace(cfg, h_x=cfg.h_x / refine, h_y=cfg.h_y / refine,
                          scheme=replace(cfg.scheme, tau=cfg.scheme.tau / refine))
        if tau is not None:
            cfg = replace(cfg, scheme=_scheme(tau, cfg.scheme.theta, "--tau"))
        if theta is not None:
            cfg = replace(cfg, scheme=_scheme(cfg.scheme.tau, theta, "--theta"))
        return cfg


def _scheme(tau, theta, key):
    try:
        return SchemeConfig(theta=float(theta), tau=float(tau))
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


_MISSING = object()


def _get(section: dict, key: str, path: str, default=_MISSING, kind=float):
    full = f"{path}.{key}" if path else key
    if not isinstance(section, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in section:
        if default is _MISSING:
            raise ConfigError(full, "missing")
        return default
    value = section[key]
    if kind is None:
        return value
    try:
        if kind is float and isinstance(value, bool):
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(full, f"expected {kind.__name__}, got {value!r}") from None


def _check_keys(section: Any, allowed: set[str], path: str) -> dict:
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigError(path or "<root>", "expected a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0], "unknown key")
    return section


def _material(raw: dict, op: dict) -> MaterialParams:
    mat = _check_keys(raw.get("material"), {"medium", "fluid"}, "material")
    med = _check_keys(mat.get("medium"), {"rho", "cp", "kappa"}, "material.medium")
    flu = _check_keys(mat.get("fluid"), {"rho", "cp", "kappa"}, "material.fluid")
    d = MaterialParams()
    vals = dict(
        rho_M=_get(med, "rho", "material.medium", d.rho_M),
        cp_M=_get(med, "cp", "material.medium", d.cp_M),
        kappa_M=_get(med, "kappa", "material.medium", d.kappa_M),
        rho_F=_get(flu, "rho", "material.fluid", d.rho_F),
        cp_F=_get(flu, "cp", "material.fluid", d.cp_F),
        kappa_F=_get(flu, "kappa", "material.fluid", d.kappa_F),
        lambda_G=_get(op, "lambda_G", "operation", d.lambda_G),
        v_bar=_get(op, "velocity", "operation", d.v_bar),
    )
    keys = {"rho_M": "material.medium.rho", "cp_M": "material.medium.cp", "kappa_M": "material.medium.kappa",
            "rho_F": "material.fluid.rho", "cp_F": "material.fluid.cp", "kappa_F": "material.fluid.kappa",
            "lambda_G": "operation.lambda_G", "v_bar": "operation.velocity"}
    for name, v in vals.items():
        bad = v < 0 if name == "lambda_G" else not v > 0
        if bad:
            raise ConfigError(keys[name], f"invalid value {v}")
    return MaterialParams(**vals)


def _geometry(raw: dict) -> StorageGeometry:
    geo = _check_keys(raw.get("geometry"), {"l_x", "l_y", "l_z", "phx"}, "geometry")
    phx = _check_keys(geo.get("phx"), {"diameter", "centers"}, "geometry.phx")
    diameter = _get(phx, "diameter", "geometry.phx", 0.02)
    centers = _get(phx, "centers", "geometry.phx", [0.5], kind=None)
    if not isinstance(centers, list):
        raise ConfigError("geometry.phx.centers", "expected a list of heights")
    try:
        return StorageGeometry(
            _get(geo, "l_x", "geometry", 10.0),
            _get(geo, "l_y", "geometry", 1.0),
            _get(geo, "l_z", "geometry", 10.0),
            tuple(PhxSpec(float(c), diameter) for c in centers),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError("geometry.phx", str(exc)) from None


def _segments(raw: dict, q_ground: float) -> list[Segment]:
    items = raw.get("schedule")
    if not isinstance(items, list) or not items:
        raise ConfigError("schedule", "expected a non-empty list of segments")
    out = []
    for k, item in enumerate(items):
        path = f"schedule[{k}]"
        item = _check_keys(item, {"kind", "hours", "seconds", "q_in", "q_ground"}, path)
        try:
            kind = SegmentKind(str(_get(item, "kind", path, kind=None)).lower())
        except ValueError:
            raise ConfigError(f"{path}.kind", f"expected one of {[s.value for s in SegmentKind]}") from None
        if ("hours" in item) == ("seconds" in item):
            raise ConfigError(f"{path}.hours", "give exactly one of 'hours' or 'seconds'")
        duration = _get(item, "hours", path) * HOUR if "hours" in item else _get(item, "seconds", path)
        q_in = _get(item, "q_in", path, None) if "q_in" in item else None
        try:
            out.append(Segment(kind, duration, q_in, _get(item, "q_ground", path, q_ground)))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    return out


def parse_config(raw: Any, source: Path | None = None) -> RunConfig:
    raw = _check_keys(raw, {"geometry", "material", "operation", "discretization", "schedule", "sweep"}, "")
    op = _check_keys(raw.get("operation"),
                     {"velocity", "lambda_G", "q_ground", "initial_temperature"}, "operation")
    disc = _check_keys(raw.get("discretization"),
                       {"h_x", "h_y", "tau", "theta", "stride", "snapshot_hours"}, "discretization")
    mat = _material(raw, op)
    geometry = _geometry(raw)
    q_ground = _get(op, "q_ground", "operation", 15.0)
    h_x = _get(disc, "h_x", "discretization", 0.1)
    h_y = _get(disc, "h_y", "discretization", 0.01)
    for key, h in (("h_x", h_x), ("h_y", h_y)):
        if not h > 0:
            raise ConfigError(f"discretization.{key}", f"must be positive, got {h}")
    scheme = _scheme(_get(disc, "tau", "discretization", 8.0), _get(disc, "theta", "discretization", 0.0),
                     "discretization.tau")
    snaps = _get(disc, "snapshot_hours", "discretization", [], kind=None)
    if not isinstance(snaps, list):
        raise ConfigError("discretization.snapshot_hours", "expected a list")
    try:
        schedule = Schedule(
            _get(op, "initial_temperature", "operation", 10.0),
            tuple(_segments(raw, q_ground)),
            stride=_get(disc, "stride", "discretization", 60.0),
            snapshot_times=tuple(float(h) * HOUR for h in snaps),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("discretization", str(exc)) from None

    sweep = None
    if raw.get("sweep") is not None:
        sw = _check_keys(raw["sweep"], {"parameter", "values"}, "sweep")
        param = _get(sw, "parameter", "sweep", kind=str)
        if param not in SWEEP_PARAMETERS:
            raise ConfigError("sweep.parameter", f"expected one of {list(SWEEP_PARAMETERS)}, got {param!r}")
        values = _get(sw, "values", "sweep", kind=None)
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values", "expected a non-empty list")
        if param == "arrangement":
            values = [tuple(float(c) for c in v) for v in values]
        else:
            values = [float(v) for v in values]
        sweep = SweepSpec(param, tuple(values))
    return RunConfig(geometry, mat, h_x, h_y, scheme, schedule, sweep, source)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return parse_config(raw, path)


def bundled_config(name: str) -> Path:
    return Path(__file__).parent / "configs" / f"{name}.yaml"
