"""Charge/wait/discharge schedules, simulation runs, recorded outputs."""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregates import (
    AggregationOperators,
    EnergyReport,
    aggregation_operators,
    energy_report,
    rate_bottom,
    rate_phx,
)
from .assembly import MaterialParams, PumpMode, SemiDiscreteSystem, assemble, input_function
from .grid import Grid, IndexMaps, PhxSpec, PointClass, StorageGeometry, field_from_state, grid_from_steps, index_maps
from .stepping import Integrator, SchemeConfig, check_stability

HOUR = 3600.0
TIME_EPS = 1e-9

SERIES_COLUMNS = (
    "t", "segment", "pump",
    "Q_S", "Q_M", "Q_F", "Q_O", "Q_B",
    "R_P", "R_B",
    "G_S", "G_P", "G_B",
)


class SegmentKind(enum.Enum):
    CHARGE = "charge"
    DISCHARGE = "discharge"
    WAIT = "wait"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    duration: float
    q_in: float | None = None
    q_ground: float = 15.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        if self.kind is SegmentKind.WAIT and self.q_in is not None:
            raise ValueError("a wait segment carries no inlet temperature")
        if self.kind is not SegmentKind.WAIT and self.q_in is None:
            raise ValueError(f"{self.kind.value} segment needs an inlet temperature")

    @property
    def mode(self) -> PumpMode:
        return PumpMode.OFF if self.kind is SegmentKind.WAIT else PumpMode.ON

    def inputs(self) -> np.ndarray:
        return input_function(self.mode, self.q_in or 0.0, self.q_ground)


@dataclass(frozen=True)
class Schedule:
    initial_temperature: float | np.ndarray
    segments: tuple[Segment, ...]
    stride: float = 60.0
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "snapshot_times", tuple(sorted(self.snapshot_times)))
        if not self.segments:
            raise ValueError("schedule has no segments")
        if not self.stride > 0:
            raise ValueError("sampling stride must be positive")
        for ts in self.snapshot_times:
            if not 0.0 <= ts <= self.horizon + TIME_EPS:
                raise ValueError(f"snapshot time {ts} outside the horizon [0, {self.horizon}]")

    @property
    def horizon(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])


def charge_schedule(hours: float = 36.0, q_in: float = 40.0, q0: float = 10.0,
                    q_ground: float = 15.0, **kw) -> Schedule:
    kind = SegmentKind.CHARGE if q_in >= q0 else SegmentKind.DISCHARGE
    return Schedule(q0, (Segment(kind, hours * HOUR, q_in, q_ground),), **kw)


def waiting_segments(kind: SegmentKind, q_in: float, subintervals: Sequence[float] = (8, 12, 16),
                     q_ground: float = 15.0) -> list[Segment]:
    """Each subinterval (hours) is split into equal pumping and waiting halves."""
    out = []
    for length in subintervals:
        half = 0.5 * length * HOUR
        out.append(Segment(kind, half, q_in, q_ground))
        out.append(Segment(SegmentKind.WAIT, half, None, q_ground))
    return out


def waiting_schedule(q_in: float = 40.0, q0: float = 10.0, subintervals=(8, 12, 16),
                     q_ground: float = 15.0, **kw) -> Schedule:
    kind = SegmentKind.CHARGE if q_in >= q0 else SegmentKind.DISCHARGE
    return Schedule(q0, tuple(waiting_segments(kind, q_in, subintervals, q_ground)), **kw)


def glued_schedule(q_charge: float = 40.0, q_discharge: float = 5.0, q0: float = 10.0,
                   subintervals=(8, 12, 16), q_ground: float = 15.0, **kw) -> Schedule:
    """Charge with waiting periods for 36 h, then discharge with waiting periods."""
    segs = waiting_segments(SegmentKind.CHARGE, q_charge, subintervals, q_ground)
    segs += waiting_segments(SegmentKind.DISCHARGE, q_discharge, subintervals, q_ground)
    return Schedule(q0, tuple(segs), **kw)


@dataclass
class TimeSeries:
    """Column store of recorded samples; columns are :data:`SERIES_COLUMNS`."""

    data: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def __len__(self) -> int:
        return len(self.data["t"])

    @property
    def columns(self) -> list[str]:
        return list(self.data)

    def to_csv(self, path: str | Path) -> None:
        cols = self.columns
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in zip(*(self.data[c] for c in cols)):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeries":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in r] for r in reader]
        arr = np.array(rows, dtype=float).reshape(-1, len(header))
        return cls({c: arr[:, k] for k, c in enumerate(header)})

    def with_columns(self, extra: dict[str, np.ndarray]) -> "TimeSeries":
        return TimeSeries({**self.data, **extra})


@dataclass(frozen=True)
class Snapshot:
    t: float
    field: np.ndarray = field(repr=False)

    def to_csv(self, path: str | Path, grid: Grid) -> Path:
        """Write the temperature matrix (row ``j = N_y`` first) plus a JSON sidecar."""
        path = Path(path)
        np.savetxt(path, self.field.T[::-1], delimiter=",", fmt="%.10g")
        meta = {
            "t": self.t,
            "h_x": grid.h_x,
            "h_y": grid.h_y,
            "n_x": grid.n_x,
            "n_y": grid.n_y,
            "row_order": "j = N_y first, columns i = 0..N_x",
            "classification_legend": {c.name: int(c) for c in PointClass},
            "classification": grid.labels.T[::-1].tolist(),
        }
        side = path.with_suffix(".json")
        side.write_text(json.dumps(meta))
        return side


@dataclass
class RunResult:
    series: TimeSeries
    snapshots: list[Snapshot]
    final_y: np.ndarray
    segment_end_states: list[np.ndarray]


class SegmentDriver:
    """Stepping and input evaluation for one schedule segment."""

    def __init__(self, ops: AggregationOperators, g: np.ndarray, theta: float):
        self.ops = ops
        self._g = g
        self._integ = Integrator(ops.sys, g, theta)

    def inputs(self, y: np.ndarray) -> np.ndarray:
        return self._g

    def step(self, y: np.ndarray, tau: float) -> np.ndarray:
        return self._integ.step(y, tau)


class OriginalModel:
    """Pump on during (dis)charging, pump off with insulated inlet during waiting."""

    def __init__(self, grid: Grid, mat: MaterialParams, maps: IndexMaps | None = None):
        self.grid = grid
        self.mat = mat
        self.maps = maps or index_maps(grid)
        self.systems: dict[PumpMode, SemiDiscreteSystem] = {
            m: assemble(grid, self.maps, mat, m) for m in PumpMode
        }
        self.ops = {m: aggregation_operators(s) for m, s in self.systems.items()}

    def driver(self, seg: Segment, theta: float) -> SegmentDriver:
        return SegmentDriver(self.ops[seg.mode], seg.inputs(), theta)


def initial_state(grid: Grid, maps: IndexMaps, q0) -> np.ndarray:
    if np.isscalar(q0):
        return np.full(grid.n, float(q0))
    q0 = np.asarray(q0, dtype=float)
    if q0.shape == (grid.n,):
        return q0.copy()
    if q0.shape == grid.labels.shape:
        return q0[maps.inner[:, 0], maps.inner[:, 1]].copy()
    raise ValueError(f"initial temperature field has shape {q0.shape}")


def run(schedule: Schedule, grid: Grid, mat: MaterialParams, scheme: SchemeConfig,
        model=None, y0: np.ndarray | None = None) -> RunResult:
    """Execute the schedule segment by segment and record outputs.

    Steps are shortened so that segment ends and snapshot times are hit exactly.
    Gains of the PHX and bottom fluxes are integrated with the trapezoidal rule
    on the step grid, evaluating both step ends with the segment's inputs.
    """
    model = model or OriginalModel(grid, mat)
    if scheme.theta == 0.0 and scheme.enforce_stability:
        check_stability(scheme.tau, mat, grid)
    maps = model.maps
    tau = scheme.tau
    y = initial_state(grid, maps, schedule.initial_temperature) if y0 is None else np.array(y0, dtype=float)
    geo = grid.geometry
    cap_M = mat.heat_capacity_M * (geo.area - geo.fluid_area) * geo.l_z
    cap_F = mat.heat_capacity_F * geo.fluid_area * geo.l_z

    rec: dict[str, list[float]] = {c: [] for c in SERIES_COLUMNS}
    snapshots: list[Snapshot] = []
    seg_ends: list[np.ndarray] = []
    ref = {}
    G_P = G_B = 0.0

    def record(t, s_idx, drv, y, g, rp, rb):
        av = drv.ops.averages(y, g)
        if not ref:
            ref.update(av)
        gs = cap_M * (av["Q_M"] - ref["Q_M"])
        if cap_F > 0:
            gs += cap_F * (av["Q_F"] - ref["Q_F"])
        row = dict(t=t, segment=s_idx, pump=float(drv.ops.mode is PumpMode.ON), R_P=rp, R_B=rb,
                   G_S=gs, G_P=G_P, G_B=G_B, **av)
        for c in SERIES_COLUMNS:
            rec[c].append(float(row[c]))

    def snap(t, drv, y, g):
        y_bar = drv.ops.sys.lift(y, g)
        snapshots.append(Snapshot(t, field_from_state(grid, maps, y, y_bar)))

    snaps = list(schedule.snapshot_times)
    next_sample = 0.0
    t_start = 0.0
    for s_idx, seg in enumerate(schedule.segments):
        drv = model.driver(seg, scheme.theta)
        ops = drv.ops
        t_end = t_start + seg.duration
        g = drv.inputs(y)
        rp, rb = rate_phx(ops, y, g), rate_bottom(ops, y, g)
        if s_idx == 0:
            record(0.0, s_idx, drv, y, g, rp, rb)
            next_sample = schedule.stride
            while snaps and snaps[0] <= TIME_EPS:
                snap(0.0, drv, y, g)
                snaps.pop(0)
        targets = sorted({t_end, *[s for s in snaps if t_start < s < t_end - TIME_EPS]})
        t = t_start
        for target in targets:
            base = t
            m_full = int(math.floor((target - base) / tau + TIME_EPS))
            steps = [tau] * m_full
            rem = target - (base + m_full * tau)
            if rem > TIME_EPS * tau:
                steps.append(rem)
            for m, dt in enumerate(steps, start=1):
                y = drv.step(y, dt)
                g = drv.inputs(y)
                rp1, rb1 = rate_phx(ops, y, g), rate_bottom(ops, y, g)
                G_P += 0.5 * dt * (rp + rp1)
                G_B += 0.5 * dt * (rb + rb1)
                rp, rb = rp1, rb1
                t = base + m * tau if m <= m_full else target
                if t >= next_sample - TIME_EPS and t < t_end - TIME_EPS:
                    record(t, s_idx, drv, y, g, rp, rb)
                    next_sample = (math.floor(t / schedule.stride + TIME_EPS) + 1) * schedule.stride
            t = target
            while snaps and abs(snaps[0] - t) <= TIME_EPS * max(1.0, t):
                snap(t, drv, y, g)
                snaps.pop(0)
        record(t_end, s_idx, drv, y, g, rp, rb)
        next_sample = (math.floor(t_end / schedule.stride + TIME_EPS) + 1) * schedule.stride
        seg_ends.append(y.copy())
        t_start = t_end

    series = TimeSeries({c: np.asarray(v) for c, v in rec.items()})
    return RunResult(series, snapshots, y, seg_ends)


def report(result: RunResult, grid: Grid, mat: MaterialParams, t0=None, t1=None) -> EnergyReport:
    return energy_report(result.series, mat, grid.geometry, t0, t1)


# ---------------------------------------------------------------------------
# parameter sweeps

SWEEP_PARAMETERS = ("phx_position", "phx_distance", "arrangement")


def geometry_for(base: StorageGeometry, parameter: str, value, diameter: float | None = None) -> StorageGeometry:
    d = diameter if diameter is not None else (base.phxs[0].diameter if base.phxs else 0.02)
    mid = 0.5 * base.l_y
    if parameter == "phx_position":
        centers = [float(value)]
    elif parameter == "phx_distance":
        centers = [mid - 0.5 * float(value), mid + 0.5 * float(value)]
    elif parameter == "arrangement":
        centers = [float(c) for c in value]
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")
    return replace(base, phxs=tuple(PhxSpec(c, d) for c in centers))


@dataclass
class SweepEntry:
    value: object
    report: EnergyReport
    series: TimeSeries


def sweep(schedule: Schedule, base_geometry: StorageGeometry, h_x: float, h_y: float,
          mat: MaterialParams, scheme: SchemeConfig, parameter: str, values: Sequence,
          jobs: int = 1) -> list[SweepEntry]:
    """Independent runs of one schedule for each parameter value."""

    def one(value):
        geo = geometry_for(base_geometry, parameter, value)
        grid = grid_from_steps(geo, h_x, h_y)
        res = run(schedule, grid, mat, scheme)
        return SweepEntry(value, report(res, grid, mat), res.series)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]
