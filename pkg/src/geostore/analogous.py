"""Time-invariant analogue of the storage model.

The fluid is kept moving during waiting periods, and the inlet temperature is
set to the current average fluid temperature.  That average is evaluated from
the state at the start of each step and treated as an exogenous input, so
the system matrices stay those of the pump-on regime at all times.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .aggregates import AggregationOperators, Functional
from .assembly import PumpMode, SemiDiscreteSystem
from .scenario import OriginalModel, Segment, SegmentDriver, SegmentKind, TimeSeries
from .stepping import SimulationState, check_stability

ERROR_FLOOR = 1.0  # K, floor of the relative-error denominator


class SeriesMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AnalogousSystem:
    sys: SemiDiscreteSystem = field(repr=False)
    c_F: Functional = field(repr=False)

    @property
    def A_lti(self) -> sp.csr_matrix:
        return self.sys.A

    @property
    def B_lti(self) -> sp.csr_matrix:
        return self.sys.B

    def fluid_feedback(self, y: np.ndarray, q_ground: float) -> float:
        """Average fluid temperature with the inlet column held at that same average.

        The pump-on lift puts the inlet temperature into the fluid average, so
        the self-consistent value solves ``q = row@y + o_in*q + o_G*q_ground``.
        """
        row, (o_in, o_g) = self.c_F.row, self.c_F.offset
        return float((row @ y + o_g * q_ground) / (1.0 - o_in))

    def inputs(self, kind: SegmentKind, y: np.ndarray, q_in: float | None, q_ground: float) -> np.ndarray:
        if kind is SegmentKind.WAIT:
            return np.array([self.fluid_feedback(y, q_ground), q_ground])
        return np.array([q_in, q_ground], dtype=float)


def analogous_system(ops_on: AggregationOperators) -> AnalogousSystem:
    if ops_on.mode is not PumpMode.ON:
        raise ValueError("the analogous model is built on the pump-on system")
    return AnalogousSystem(ops_on.sys, ops_on.c_F)


def step_analogous(state: SimulationState, asys: AnalogousSystem, kind: SegmentKind,
                   q_in: float | None, q_ground: float, tau: float,
                   enforce_stability: bool = True) -> SimulationState:
    if enforce_stability:
        check_stability(tau, asys.sys.mat, asys.sys.grid)
    g = asys.inputs(kind, state.y, q_in, q_ground)
    y = state.y + tau * (asys.A_lti @ state.y + asys.B_lti @ g)
    return SimulationState(y, state.t + tau, state.k + 1)


class _FeedbackDriver(SegmentDriver):
    def __init__(self, ops: AggregationOperators, asys: AnalogousSystem, q_ground: float):
        self.ops = ops
        self.asys = asys
        self.q_ground = q_ground

    def inputs(self, y: np.ndarray) -> np.ndarray:
        return self.asys.inputs(SegmentKind.WAIT, y, None, self.q_ground)

    def step(self, y: np.ndarray, tau: float) -> np.ndarray:
        g = self.inputs(y)
        return y + tau * (self.asys.A_lti @ y + self.asys.B_lti @ g)


class AnalogousModel(OriginalModel):
    """Drop-in model for :func:`geostore.scenario.run` using the analogous dynamics."""

    def __init__(self, grid, mat, maps=None, original: OriginalModel | None = None):
        if original is not None:
            self.grid, self.mat, self.maps = original.grid, original.mat, original.maps
            self.systems, self.ops = original.systems, original.ops
        else:
            super().__init__(grid, mat, maps)
        self.asys = analogous_system(self.ops[PumpMode.ON])

    def driver(self, seg: Segment, theta: float) -> SegmentDriver:
        if theta != 0.0:
            raise ValueError("the analogous model is stepped explicitly")
        if seg.kind is SegmentKind.WAIT:
            return _FeedbackDriver(self.ops[PumpMode.ON], self.asys, seg.q_ground)
        return SegmentDriver(self.ops[PumpMode.ON], seg.inputs(), 0.0)


def compare(original: TimeSeries, analogous: TimeSeries,
            quantities=("Q_S", "Q_F", "Q_O")) -> dict[str, np.ndarray]:
    """Per-sample relative errors ``|Q_a - Q_o| / max(|Q_o|, 1 K)``."""
    if len(original) != len(analogous) or not np.array_equal(original["t"], analogous["t"]):
        raise SeriesMismatch("series have different sample times")
    out = {"t": original["t"].copy()}
    for q in quantities:
        ref = original[q]
        out[f"err_{q}"] = np.abs(analogous[q] - ref) / np.maximum(np.abs(ref), ERROR_FLOOR)
    return out
