"""Semi-discrete system ``dY/dt = A Y + B g`` for one pump mode.

Every boundary and interface point is eliminated through a closure that
expresses its temperature as a convex combination of neighbouring grid values
and the two inputs ``g = (Q_in, Q_G)``:

* interface rows: one-sided flux continuity,
  ``Q_I = (kappa_F*Q_fluid + kappa_M*Q_medium) / (kappa_F + kappa_M)``
* bottom (Robin): ``Q_i0 = (kappa_M*Q_i1 + lambda_G*h_y*Q_G) / (kappa_M + lambda_G*h_y)``
* inlet with pump on (Dirichlet): ``Q = Q_in``
* top, sides, outlet, and inlet with pump off: mirror of the inner neighbour

Closures are expanded recursively until only inner points and inputs remain.
The same expansion builds the stencil rows of ``A``/``B`` and the lift
``Y_bar = C_lift @ Y + C_in @ g``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .grid import Grid, IndexMaps, PointClass


class DimensionMismatch(ValueError):
    pass


class PumpMode(enum.Enum):
    ON = "on"
    OFF = "off"


@dataclass(frozen=True)
class MaterialParams:
    """Constant material data of medium (M) and fluid (F), SI units."""

    rho_M: float = 2000.0
    cp_M: float = 800.0
    kappa_M: float = 1.59
    rho_F: float = 998.0
    cp_F: float = 4182.0
    kappa_F: float = 0.60
    lambda_G: float = 10.0
    v_bar: float = 1e-2

    def __post_init__(self):
        for name in ("rho_M", "cp_M", "kappa_M", "rho_F", "cp_F", "kappa_F", "v_bar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        # lambda_G = 0 is admitted as the closed-bottom limit
        if self.lambda_G < 0:
            raise ValueError(f"lambda_G must be non-negative, got {self.lambda_G}")

    @property
    def a_M(self) -> float:
        return self.kappa_M / (self.rho_M * self.cp_M)

    @property
    def a_F(self) -> float:
        return self.kappa_F / (self.rho_F * self.cp_F)

    @property
    def heat_capacity_M(self) -> float:
        return self.rho_M * self.cp_M

    @property
    def heat_capacity_F(self) -> float:
        return self.rho_F * self.cp_F

    def velocity(self, mode: PumpMode) -> float:
        return self.v_bar if mode is PumpMode.ON else 0.0


def input_function(mode: PumpMode, q_in: float, q_ground: float) -> np.ndarray:
    if mode is PumpMode.ON:
        return np.array([q_in, q_ground], dtype=float)
    return np.array([0.0, q_ground], dtype=float)


class _Closures:
    """Recursive expansion of grid values into inner-state and input weights."""

    def __init__(self, grid: Grid, maps: IndexMaps, mat: MaterialParams, mode: PumpMode):
        self.grid = grid
        self.maps = maps
        self.mode = mode
        self.w_fluid = mat.kappa_F / (mat.kappa_F + mat.kappa_M)
        lh = mat.lambda_G * grid.h_y
        self.w_robin_inner = mat.kappa_M / (mat.kappa_M + lh)
        self.w_robin_ground = lh / (mat.kappa_M + lh)
        self._memo: dict[tuple[int, int], tuple[dict[int, float], np.ndarray]] = {}

    def _rule(self, i: int, j: int):
        """Return ``([(weight, (i', j')), ...], input_weights)`` for one point."""
        g = self.grid
        label = PointClass(g.labels[i, j])
        none = np.zeros(2)
        if label == PointClass.INTERFACE_LOWER:
            return [(self.w_fluid, (i, j + 1)), (1 - self.w_fluid, (i, j - 1))], none
        if label == PointClass.INTERFACE_UPPER:
            return [(self.w_fluid, (i, j - 1)), (1 - self.w_fluid, (i, j + 1))], none
        if label == PointClass.BOUNDARY_BOTTOM:
            return [(self.w_robin_inner, (i, 1))], np.array([0.0, self.w_robin_ground])
        if label == PointClass.BOUNDARY_TOP:
            return [(1.0, (i, g.n_y - 1))], none
        if label == PointClass.INLET:
            if self.mode is PumpMode.ON:
                return [], np.array([1.0, 0.0])
            return [(1.0, (1, j))], none
        if label in (PointClass.BOUNDARY_LEFT,):
            return [(1.0, (1, j))], none
        if label in (PointClass.BOUNDARY_RIGHT, PointClass.OUTLET):
            return [(1.0, (g.n_x - 1, j))], none
        raise AssertionError(f"no closure for inner point ({i}, {j})")

    def expand(self, i: int, j: int) -> tuple[dict[int, float], np.ndarray]:
        l = self.maps.k[i, j]
        if l >= 0:
            return {int(l): 1.0}, np.zeros(2)
        key = (i, j)
        if key in self._memo:
            return self._memo[key]
        terms, inputs = self._rule(i, j)
        weights: dict[int, float] = {}
        inputs = inputs.copy()
        for w, (ni, nj) in terms:
            sub, sub_in = self.expand(ni, nj)
            for col, v in sub.items():
                weights[col] = weights.get(col, 0.0) + w * v
            inputs += w * sub_in
        self._memo[key] = (weights, inputs)
        return weights, inputs


@dataclass(frozen=True, eq=False)
class SemiDiscreteSystem:
    grid: Grid
    maps: IndexMaps
    mat: MaterialParams
    mode: PumpMode
    A: sp.csr_matrix = field(repr=False)
    B: sp.csr_matrix = field(repr=False)
    C_lift: sp.csr_matrix = field(repr=False)
    C_in: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def lift(self, y: np.ndarray, g: np.ndarray) -> np.ndarray:
        return lift_boundary(self, y, g)


def assemble(grid: Grid, maps: IndexMaps, mat: MaterialParams, mode: PumpMode) -> SemiDiscreteSystem:
    clos = _Closures(grid, maps, mat, mode)
    v = mat.velocity(mode)
    hx2, hy2 = grid.h_x ** 2, grid.h_y ** 2
    rows, cols, vals = [], [], []
    b_rows, b_cols, b_vals = [], [], []

    def add(l: int, coef: float, i: int, j: int):
        weights, inputs = clos.expand(i, j)
        for col, w in weights.items():
            rows.append(l)
            cols.append(col)
            vals.append(coef * w)
        for r in (0, 1):
            if inputs[r] != 0.0:
                b_rows.append(l)
                b_cols.append(r)
                b_vals.append(coef * inputs[r])

    for l, (i, j) in enumerate(maps.inner):
        fluid = grid.labels[i, j] == PointClass.INNER_FLUID
        a = mat.a_F if fluid else mat.a_M
        rows.append(l)
        cols.append(l)
        vals.append(-2.0 * a / hx2 - 2.0 * a / hy2)
        add(l, a / hx2, i - 1, j)
        add(l, a / hx2, i + 1, j)
        add(l, a / hy2, i, j - 1)
        add(l, a / hy2, i, j + 1)
        if fluid and v > 0.0:
            # first-order upwind, flow in +x
            rows.append(l)
            cols.append(l)
            vals.append(-v / grid.h_x)
            add(l, v / grid.h_x, i - 1, j)

    n = grid.n
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    A.eliminate_zeros()
    B = sp.csr_matrix((b_vals, (b_rows, b_cols)), shape=(n, 2))
    B.sum_duplicates()

    lr, lc, lv = [], [], []
    C_in = np.zeros((grid.n_bar, 2))
    for lb, (i, j) in enumerate(maps.lifted):
        weights, inputs = clos.expand(int(i), int(j))
        for col, w in weights.items():
            lr.append(lb)
            lc.append(col)
            lv.append(w)
        C_in[lb] = inputs
    C_lift = sp.csr_matrix((lv, (lr, lc)), shape=(grid.n_bar, n))
    C_in.setflags(write=False)
    return SemiDiscreteSystem(grid, maps, mat, mode, A, B, C_lift, C_in)


def lift_boundary(sys: SemiDiscreteSystem, y: np.ndarray, g: np.ndarray | None = None) -> np.ndarray:
    """Boundary/interface temperatures ``C_lift @ y`` plus the affine input part.

    Without ``g`` only the linear part is returned (inlet and bottom entries
    then miss their ``Q_in``/``Q_G`` contributions).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (sys.n,):
        raise DimensionMismatch(f"state has shape {y.shape}, expected ({sys.n},)")
    out = sys.C_lift @ y
    if g is not None:
        out = out + sys.C_in @ np.asarray(g, dtype=float)
    return out


def write_triplets(path: str | Path, matrix) -> None:
    """Write a matrix as ``row col value`` lines with 1-based indices."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r + 1} {c + 1} {v:.17g}\n")


def read_triplets(path: str | Path, shape: tuple[int, int]) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int) - 1, data[:, 1].astype(int) - 1)), shape=shape)
