"""Computational grid over the storage cross-section.

Grid points are ``(x_i, y_j) = (i*h_x, j*h_y)`` for ``i = 0..N_x`` and
``j = 0..N_y``.  Every point receives exactly one :class:`PointClass` label.
Points that carry an unknown of the semi-discrete system ("inner" points) are
enumerated column by column (ascending ``i``, then ascending ``j``), which gives
the system matrix its block-tridiagonal layout.  All remaining points (outer
boundary and fluid/medium interface rows) are enumerated in the same order into
the lifted vector.

Indices are 0-based throughout the package.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ALIGN_RTOL = 1e-12


class GridError(ValueError):
    """Base class for invalid grid/geometry combinations."""


class GeometryNotAligned(GridError):
    """A PHX boundary does not fall on a grid row (or the PHX is too thin)."""


class PhxOverlap(GridError):
    """Two PHXs intersect or are not separated by a medium row."""


class PointClass(enum.IntEnum):
    INNER_MEDIUM = 0
    INNER_FLUID = 1
    INTERFACE_UPPER = 2
    INTERFACE_LOWER = 3
    BOUNDARY_TOP = 4
    BOUNDARY_LEFT = 5
    BOUNDARY_RIGHT = 6
    BOUNDARY_BOTTOM = 7
    INLET = 8
    OUTLET = 9


INNER_CLASSES = (PointClass.INNER_MEDIUM, PointClass.INNER_FLUID)


@dataclass(frozen=True)
class PhxSpec:
    """Straight horizontal pipe heat exchanger; fluid flows in +x."""

    center_y: float
    diameter: float

    @property
    def lower(self) -> float:
        return self.center_y - 0.5 * self.diameter

    @property
    def upper(self) -> float:
        return self.center_y + 0.5 * self.diameter


@dataclass(frozen=True)
class StorageGeometry:
    l_x: float
    l_y: float
    l_z: float
    phxs: tuple[PhxSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "phxs", tuple(sorted(self.phxs, key=lambda p: p.center_y)))
        for name in ("l_x", "l_y", "l_z"):
            if not getattr(self, name) > 0:
                raise GridError(f"{name} must be positive, got {getattr(self, name)}")
        for p in self.phxs:
            if p.diameter <= 0:
                raise GridError(f"PHX diameter must be positive, got {p.diameter}")
            if not (p.lower > 0 and p.upper < self.l_y):
                raise GridError(
                    f"PHX at y={p.center_y} with d={p.diameter} is not strictly inside (0, {self.l_y})"
                )
        for a, b in zip(self.phxs, self.phxs[1:]):
            if b.lower <= a.upper:
                raise PhxOverlap(f"PHXs at y={a.center_y} and y={b.center_y} intersect")

    @property
    def n_phx(self) -> int:
        return len(self.phxs)

    @property
    def area(self) -> float:
        return self.l_x * self.l_y

    @property
    def fluid_area(self) -> float:
        return self.l_x * sum(p.diameter for p in self.phxs)


@dataclass(frozen=True)
class PhxRows:
    """Grid rows of the lower and upper fluid/medium interface of one PHX."""

    lower: int
    upper: int

    @property
    def fluid_rows(self) -> range:
        return range(self.lower + 1, self.upper)


def _snap(value: float, step_count: int, length: float, what: str) -> int:
    pos = value / length * step_count
    j = int(round(pos))
    if abs(pos - j) > ALIGN_RTOL * max(1.0, abs(pos)):
        raise GeometryNotAligned(
            f"{what} at y={value!r} does not lie on a grid row (y/h_y = {pos!r})"
        )
    return j


@dataclass(frozen=True, eq=False)
class Grid:
    geometry: StorageGeometry
    n_x: int
    n_y: int
    phx_rows: tuple[PhxRows, ...]
    labels: np.ndarray = field(repr=False)

    @property
    def h_x(self) -> float:
        return self.geometry.l_x / self.n_x

    @property
    def h_y(self) -> float:
        return self.geometry.l_y / self.n_y

    @property
    def n_phx(self) -> int:
        return len(self.phx_rows)

    @property
    def q(self) -> int:
        """Block size: number of inner points per grid column."""
        return self.n_y - 2 * self.n_phx - 1

    @property
    def n(self) -> int:
        return (self.n_x - 1) * self.q

    @property
    def n_bar(self) -> int:
        return (self.n_x + 1) * (self.n_y + 1) - self.n

    @property
    def n_points(self) -> int:
        return (self.n_x + 1) * (self.n_y + 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x + 1) * self.h_x

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.n_y + 1) * self.h_y

    def row_kind(self, j: int) -> PointClass:
        """Label an interior (0 < i < N_x) point of row ``j`` would get."""
        for r in self.phx_rows:
            if j == r.lower:
                return PointClass.INTERFACE_LOWER
            if j == r.upper:
                return PointClass.INTERFACE_UPPER
            if r.lower < j < r.upper:
                return PointClass.INNER_FLUID
        return PointClass.INNER_MEDIUM

    def is_pipe_row(self, j: int) -> bool:
        return self.row_kind(j) != PointClass.INNER_MEDIUM

    def inner_rows(self) -> list[int]:
        return [j for j in range(1, self.n_y) if self.row_kind(j) in INNER_CLASSES]

    def is_inner(self, i: int, j: int) -> bool:
        return PointClass(self.labels[i, j]) in INNER_CLASSES


def build_grid(geometry: StorageGeometry, n_x: int, n_y: int) -> Grid:
    """Build and classify the ``(n_x+1) x (n_y+1)`` point grid.

    PHX interfaces must coincide with grid rows; the function refuses rather
    than snapping.  Each PHX needs at least one fluid row between its two
    interface rows, and every interface must border a medium row that is not
    itself a boundary or another interface.
    """
    if n_x < 4:
        raise GridError(f"n_x must be >= 4, got {n_x}")
    if n_y < 4:
        raise GridError(f"n_y must be >= 4, got {n_y}")

    rows = []
    for p in geometry.phxs:
        lo = _snap(p.lower, n_y, geometry.l_y, f"lower interface of PHX y={p.center_y}")
        hi = _snap(p.upper, n_y, geometry.l_y, f"upper interface of PHX y={p.center_y}")
        if hi - lo < 2:
            raise GeometryNotAligned(
                f"PHX at y={p.center_y} spans {hi - lo + 1} grid rows; "
                "at least 3 are needed (refine h_y)"
            )
        if lo < 2 or hi > n_y - 2:
            raise GeometryNotAligned(
                f"PHX at y={p.center_y} needs a medium row between it and the outer boundary"
            )
        rows.append(PhxRows(lo, hi))
    for a, b in zip(rows, rows[1:]):
        if b.lower - a.upper < 2:
            raise PhxOverlap(
                f"PHXs with interface rows {a.upper} and {b.lower} are not separated by a medium row"
            )

    labels = np.empty((n_x + 1, n_y + 1), dtype=np.int8)
    grid = Grid(geometry, n_x, n_y, tuple(rows), labels)
    for j in range(n_y + 1):
        kind = grid.row_kind(j)
        labels[1:n_x, j] = kind
        if kind == PointClass.INNER_MEDIUM:
            labels[0, j] = PointClass.BOUNDARY_LEFT
            labels[n_x, j] = PointClass.BOUNDARY_RIGHT
        else:
            labels[0, j] = PointClass.INLET
            labels[n_x, j] = PointClass.OUTLET
    # corner precedence: bottom > top > left/right
    labels[:, n_y] = PointClass.BOUNDARY_TOP
    labels[:, 0] = PointClass.BOUNDARY_BOTTOM
    labels.setflags(write=False)
    return grid


def grid_from_steps(geometry: StorageGeometry, h_x: float, h_y: float) -> Grid:
    """Build a grid from step sizes; ``l_x/h_x`` and ``l_y/h_y`` must be integers."""
    n_x = int(round(geometry.l_x / h_x))
    n_y = int(round(geometry.l_y / h_y))
    for length, h, count, name in ((geometry.l_x, h_x, n_x, "h_x"), (geometry.l_y, h_y, n_y, "h_y")):
        if count < 1 or abs(length / h - count) > ALIGN_RTOL * count:
            raise GeometryNotAligned(f"{name}={h} does not divide the storage extent {length}")
    return build_grid(geometry, n_x, n_y)


@dataclass(frozen=True, eq=False)
class IndexMaps:
    """Bijections between grid index pairs and state / lifted vector positions.

    ``k[i, j]`` is the position of inner point ``(i, j)`` in ``Y`` (or -1);
    ``k_bar[i, j]`` the position of a boundary/interface point in the lifted
    vector (or -1).  ``inner`` and ``lifted`` hold the inverse maps as
    ``(count, 2)`` arrays of ``(i, j)``.
    """

    k: np.ndarray = field(repr=False)
    k_bar: np.ndarray = field(repr=False)
    inner: np.ndarray = field(repr=False)
    lifted: np.ndarray = field(repr=False)

    def state_index(self, i: int, j: int) -> int:
        l = int(self.k[i, j])
        if l < 0:
            raise KeyError(f"({i}, {j}) is not an inner point")
        return l

    def lifted_index(self, i: int, j: int) -> int:
        l = int(self.k_bar[i, j])
        if l < 0:
            raise KeyError(f"({i}, {j}) is not a boundary or interface point")
        return l


def index_maps(grid: Grid) -> IndexMaps:
    inner_mask = np.isin(grid.labels, [int(c) for c in INNER_CLASSES])
    k = np.full(grid.labels.shape, -1, dtype=np.int64)
    k_bar = np.full(grid.labels.shape, -1, dtype=np.int64)
    # C-order over (i, j) = column-major in the spatial picture: blocks by i
    ii, jj = np.nonzero(inner_mask)
    k[ii, jj] = np.arange(ii.size)
    bi, bj = np.nonzero(~inner_mask)
    k_bar[bi, bj] = np.arange(bi.size)
    for a in (k, k_bar):
        a.setflags(write=False)
    inner = np.column_stack([ii, jj])
    lifted = np.column_stack([bi, bj])
    inner.setflags(write=False)
    lifted.setflags(write=False)
    return IndexMaps(k, k_bar, inner, lifted)


def field_from_state(grid: Grid, maps: IndexMaps, y: np.ndarray, y_bar: np.ndarray) -> np.ndarray:
    """Scatter ``Y`` and the lifted vector into an ``(N_x+1, N_y+1)`` array."""
    out = np.empty(grid.labels.shape)
    out[maps.inner[:, 0], maps.inner[:, 1]] = y
    out[maps.lifted[:, 0], maps.lifted[:, 1]] = y_bar
    return out


def phx_geometry(centers: Sequence[float], diameter: float, l_x: float = 10.0,
                 l_y: float = 1.0, l_z: float = 10.0) -> StorageGeometry:
    return StorageGeometry(l_x, l_y, l_z, tuple(PhxSpec(c, diameter) for c in centers))
