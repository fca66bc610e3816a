"""Aggregated characteristics: averages, heat-flux rates, energy gains.

Averages over grid-aligned rectangles and boundary segments use the composite
trapezoidal rule.  Grid values that are not part of the state vector are
routed through the lift of the system, so each average is an affine
functional ``row @ y + offset @ g`` of the state ``y`` and the input ``g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import PumpMode, SemiDiscreteSystem
from .grid import Grid, PointClass


class RectNotAligned(ValueError):
    pass


class RectTooThin(ValueError):
    pass


class SegmentNotAligned(ValueError):
    pass


class WindowOutOfRange(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Functional:
    """Affine map ``y, g -> row @ y + offset @ g``."""

    row: np.ndarray = field(repr=False)
    offset: np.ndarray

    def __call__(self, y: np.ndarray, g: np.ndarray) -> float:
        return float(self.row @ y + self.offset @ g)

    def __add__(self, other: "Functional") -> "Functional":
        return Functional(self.row + other.row, self.offset + other.offset)

    def __rmul__(self, c: float) -> "Functional":
        return Functional(c * self.row, c * self.offset)

    def total_weight(self) -> float:
        return float(self.row.sum() + self.offset.sum())


def _from_point_weights(sys: SemiDiscreteSystem, weights: np.ndarray) -> Functional:
    """Contract an ``(N_x+1, N_y+1)`` array of grid-point weights to a functional."""
    maps = sys.maps
    d = weights[maps.inner[:, 0], maps.inner[:, 1]]
    d_bar = weights[maps.lifted[:, 0], maps.lifted[:, 1]]
    row = d + sys.C_lift.T @ d_bar
    offset = d_bar @ sys.C_in
    return Functional(np.asarray(row, dtype=float), np.asarray(offset, dtype=float))


def trapezoid_weights(lo: int, hi: int) -> np.ndarray:
    w = np.ones(hi - lo + 1)
    w[0] = w[-1] = 0.5
    return w / (hi - lo)


def rect_from_coords(grid: Grid, x0: float, x1: float, y0: float, y1: float) -> tuple[int, int, int, int]:
    out = []
    for v, h in ((x0, grid.h_x), (x1, grid.h_x), (y0, grid.h_y), (y1, grid.h_y)):
        k = int(round(v / h))
        if abs(v / h - k) > 1e-9 * max(1.0, abs(k)):
            raise RectNotAligned(f"coordinate {v} is not on the grid (step {h})")
        out.append(k)
    return tuple(out)


def rect_average_operator(sys: SemiDiscreteSystem, rect: tuple[int, int, int, int]) -> Functional:
    """Trapezoidal average over the rectangle ``[i_lo, i_hi] x [j_lo, j_hi]`` (grid indices)."""
    grid = sys.grid
    i_lo, i_hi, j_lo, j_hi = rect
    if any(int(v) != v for v in rect):
        raise RectNotAligned(f"rectangle {rect} has non-integer grid indices")
    if not (0 <= i_lo and i_hi <= grid.n_x and 0 <= j_lo and j_hi <= grid.n_y):
        raise RectNotAligned(f"rectangle {rect} exceeds the grid")
    if i_hi < i_lo + 2 or j_hi < j_lo + 2:
        raise RectTooThin(f"rectangle {rect} needs at least one interior grid line per direction")
    weights = np.zeros(grid.labels.shape)
    weights[i_lo:i_hi + 1, j_lo:j_hi + 1] = np.outer(trapezoid_weights(i_lo, i_hi),
                                                     trapezoid_weights(j_lo, j_hi))
    return _from_point_weights(sys, weights)


def boundary_average_operator(sys: SemiDiscreteSystem, side: str, lo: int, hi: int) -> Functional:
    """Trapezoidal average along a boundary segment.

    ``side`` is one of ``bottom``, ``top`` (``lo``/``hi`` are ``i`` indices) or
    ``left``, ``right`` (``j`` indices).
    """
    grid = sys.grid
    if hi < lo + 2:
        raise SegmentNotAligned(f"segment [{lo}, {hi}] on {side} is shorter than two grid steps")
    weights = np.zeros(grid.labels.shape)
    w = trapezoid_weights(lo, hi)
    if side in ("bottom", "top"):
        if not (0 <= lo and hi <= grid.n_x):
            raise SegmentNotAligned(f"segment [{lo}, {hi}] exceeds the {side} boundary")
        weights[lo:hi + 1, 0 if side == "bottom" else grid.n_y] = w
    elif side in ("left", "right"):
        if not (0 <= lo and hi <= grid.n_y):
            raise SegmentNotAligned(f"segment [{lo}, {hi}] exceeds the {side} boundary")
        weights[0 if side == "left" else grid.n_x, lo:hi + 1] = w
    else:
        raise SegmentNotAligned(f"unknown boundary side {side!r}")
    return _from_point_weights(sys, weights)


def _combine(parts: list[tuple[float, Functional]]) -> Functional:
    total = sum(w for w, _ in parts)
    row = sum(w * f.row for w, f in parts) / total
    offset = sum(w * f.offset for w, f in parts) / total
    return Functional(row, offset)


@dataclass(frozen=True, eq=False)
class AggregationOperators:
    sys: SemiDiscreteSystem = field(repr=False)
    c_S: Functional
    c_M: Functional
    c_F: Functional
    c_O: Functional
    c_Bot: Functional
    area: float
    area_M: float
    area_F: float
    length_O: float
    length_B: float

    @property
    def mode(self) -> PumpMode:
        return self.sys.mode

    def averages(self, y: np.ndarray, g: np.ndarray) -> dict[str, float]:
        return {
            "Q_S": self.c_S(y, g),
            "Q_M": self.c_M(y, g),
            "Q_F": self.c_F(y, g),
            "Q_O": self.c_O(y, g),
            "Q_B": self.c_Bot(y, g),
        }


def aggregation_operators(sys: SemiDiscreteSystem) -> AggregationOperators:
    grid = sys.grid
    geo = grid.geometry
    h_y = grid.h_y
    n_x, n_y = grid.n_x, grid.n_y

    fluid_parts = []
    outlet_parts = []
    for r in grid.phx_rows:
        size = (r.upper - r.lower) * h_y
        fluid_parts.append((size * geo.l_x, rect_average_operator(sys, (0, n_x, r.lower, r.upper))))
        outlet_parts.append((size, boundary_average_operator(sys, "right", r.lower, r.upper)))

    bounds = [0] + [v for r in grid.phx_rows for v in (r.lower, r.upper)] + [n_y]
    medium_parts = []
    for lo, hi in zip(bounds[::2], bounds[1::2]):
        medium_parts.append(((hi - lo) * h_y * geo.l_x, rect_average_operator(sys, (0, n_x, lo, hi))))

    area = geo.l_x * geo.l_y
    area_M = sum(w for w, _ in medium_parts)
    c_M = _combine(medium_parts)
    if fluid_parts:
        area_F = sum(w for w, _ in fluid_parts)
        c_F = _combine(fluid_parts)
        c_O = _combine(outlet_parts)
        length_O = sum(w for w, _ in outlet_parts)
    else:
        area_F, length_O = 0.0, 0.0
        nan = Functional(np.full(sys.n, np.nan), np.full(2, np.nan))
        c_F = c_O = nan
    c_S = (area_M / area) * c_M + (area_F / area) * c_F if fluid_parts else c_M
    c_Bot = boundary_average_operator(sys, "bottom", 0, n_x)
    return AggregationOperators(sys, c_S, c_M, c_F, c_O, c_Bot, area, area_M, area_F, length_O, geo.l_x)


def rate_phx(ops: AggregationOperators, y: np.ndarray, g: np.ndarray) -> float:
    """Convective injection rate ``rho_F cp_F v0 |outlet| l_z (Q_in - Q_O)`` in W."""
    if ops.mode is PumpMode.OFF or ops.length_O == 0.0:
        return 0.0
    mat = ops.sys.mat
    q_out = ops.c_O(y, g)
    return mat.heat_capacity_F * mat.v_bar * ops.length_O * ops.sys.grid.geometry.l_z * (g[0] - q_out)


def rate_bottom(ops: AggregationOperators, y: np.ndarray, g: np.ndarray) -> float:
    """Heat transfer through the open bottom ``lambda_G |bottom| l_z (Q_G - Q_B)`` in W."""
    mat = ops.sys.mat
    return mat.lambda_G * ops.length_B * ops.sys.grid.geometry.l_z * (g[1] - ops.c_Bot(y, g))


@dataclass(frozen=True)
class EnergyReport:
    t0: float
    t1: float
    G_M: float
    G_F: float
    G_P: float
    G_B: float

    @property
    def G_S(self) -> float:
        return self.G_M + self.G_F

    @property
    def residual(self) -> float:
        return self.G_S - (self.G_P + self.G_B)

    def relative_residual(self, scale: float = 0.0) -> float:
        return abs(self.residual) / max(abs(self.G_P) + abs(self.G_B), scale)


def energy_report(series, mat, geometry, t0: float | None = None, t1: float | None = None) -> EnergyReport:
    """Gains over ``[t0, t1]`` from a recorded time series.

    Medium and fluid gains use the endpoint averages; PHX and bottom gains use
    the cumulative step-wise trapezoid integrals stored in the series.  Both
    endpoints must be sample times.
    """
    t = series["t"]
    t0 = t[0] if t0 is None else t0
    t1 = t[-1] if t1 is None else t1

    def locate(v):
        k = int(np.argmin(np.abs(t - v)))
        if abs(t[k] - v) > 1e-6 * max(1.0, abs(v)):
            raise WindowOutOfRange(f"t={v} is not a sample time of the series [{t[0]}, {t[-1]}]")
        return k

    k0, k1 = locate(t0), locate(t1)
    area_F = geometry.fluid_area
    area_M = geometry.area - area_F
    l_z = geometry.l_z
    G_M = mat.heat_capacity_M * area_M * l_z * (series["Q_M"][k1] - series["Q_M"][k0])
    G_F = 0.0
    if area_F > 0:
        G_F = mat.heat_capacity_F * area_F * l_z * (series["Q_F"][k1] - series["Q_F"][k0])
    G_P = series["G_P"][k1] - series["G_P"][k0]
    G_B = series["G_B"][k1] - series["G_B"][k0]
    return EnergyReport(float(t[k0]), float(t[k1]), float(G_M), float(G_F), float(G_P), float(G_B))


# ---------------------------------------------------------------------------
# diagnostics on the discrete cell level


def heat_content(sys: SemiDiscreteSystem, y: np.ndarray) -> float:
    """Nodal heat content ``l_z h_x h_y sum(rho c_p y)`` over the state points, in J."""
    grid = sys.grid
    mat = sys.mat
    fluid = grid.labels[sys.maps.inner[:, 0], sys.maps.inner[:, 1]] == PointClass.INNER_FLUID
    cap = np.where(fluid, mat.heat_capacity_F, mat.heat_capacity_M)
    return float(grid.h_x * grid.h_y * grid.geometry.l_z * (cap @ y))


def rate_phx_flow(ops: AggregationOperators, y: np.ndarray, g: np.ndarray) -> float:
    """Convective rate across the rows that actually carry flow in the scheme.

    Only fluid-interior rows are convected, so the flow cross-section is
    ``(#fluid rows) * h_y`` per PHX and the outlet value is the plain mean of
    the last state column over those rows.
    """
    if ops.mode is PumpMode.OFF:
        return 0.0
    sys = ops.sys
    grid = sys.grid
    rows = [j for r in grid.phx_rows for j in r.fluid_rows]
    if not rows:
        return 0.0
    idx = sys.maps.k[grid.n_x - 1, rows]
    mat = sys.mat
    return mat.heat_capacity_F * mat.v_bar * grid.h_y * grid.geometry.l_z * float(np.sum(g[0] - y[idx]))
