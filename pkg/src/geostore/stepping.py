"""Time stepping of the semi-discrete system with the theta-scheme family."""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import MaterialParams, SemiDiscreteSystem
from .grid import Grid

SOLVER_RTOL = 1e-10
# relative slack when comparing tau against the bound, absorbs rounding in the bound itself
STABILITY_RTOL = 1e-12


class StabilityViolation(RuntimeError):
    pass


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationState:
    y: np.ndarray
    t: float = 0.0
    k: int = 0


@dataclass(frozen=True)
class SchemeConfig:
    theta: float = 0.0
    tau: float = 1.0
    enforce_stability: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")


def stability_limit(mat: MaterialParams, grid: Grid) -> float:
    """Largest explicit time step: ``[2 max(a_F, a_M)(1/h_x^2 + 1/h_y^2) + v_bar/h_x]^-1``."""
    a = max(mat.a_F, mat.a_M)
    return 1.0 / (2.0 * a * (1.0 / grid.h_x ** 2 + 1.0 / grid.h_y ** 2) + mat.v_bar / grid.h_x)


def check_stability(tau: float, mat: MaterialParams, grid: Grid) -> float:
    tau_max = stability_limit(mat, grid)
    if tau > tau_max * (1.0 + STABILITY_RTOL):
        raise StabilityViolation(f"tau={tau} s exceeds the explicit stability limit {tau_max:.6g} s")
    return tau_max


def step_explicit(state: SimulationState, sys: SemiDiscreteSystem, g: np.ndarray, tau: float,
                  enforce_stability: bool = True) -> SimulationState:
    if state.y.shape != (sys.n,):
        raise ValueError(f"state has shape {state.y.shape}, expected ({sys.n},)")
    if enforce_stability:
        check_stability(tau, sys.mat, sys.grid)
    y = state.y + tau * (sys.A @ state.y + sys.B @ np.asarray(g, dtype=float))
    return SimulationState(y, state.t + tau, state.k + 1)


_lu_cache: "weakref.WeakKeyDictionary[SemiDiscreteSystem, dict]" = weakref.WeakKeyDictionary()


def _implicit_factor(sys: SemiDiscreteSystem, tau: float, theta: float):
    per_sys = _lu_cache.setdefault(sys, {})
    key = (float(tau), float(theta))
    if key not in per_sys:
        M = (sp.identity(sys.n, format="csc") - (tau * theta) * sys.A.tocsc()).tocsc()
        per_sys[key] = (M, spla.splu(M))
    return per_sys[key]


def step_theta(state: SimulationState, sys_now: SemiDiscreteSystem, sys_next: SemiDiscreteSystem,
               g_now: np.ndarray, g_next: np.ndarray, tau: float, theta: float,
               enforce_stability: bool = False) -> SimulationState:
    """One theta-scheme step; ``theta = 0`` is exactly :func:`step_explicit`.

    Solves ``(I - tau*theta*A_next) y' = (I + tau*(1-theta)*A_now) y
    + tau*[theta*B_next g_next + (1-theta)*B_now g_now]`` by sparse LU and
    verifies the relative residual.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if theta == 0.0:
        return step_explicit(state, sys_now, g_now, tau, enforce_stability)
    y = state.y
    g_now = np.asarray(g_now, dtype=float)
    g_next = np.asarray(g_next, dtype=float)
    rhs = y + tau * theta * (sys_next.B @ g_next)
    if theta < 1.0:
        rhs = rhs + tau * (1.0 - theta) * (sys_now.A @ y + sys_now.B @ g_now)
    M, lu = _implicit_factor(sys_next, tau, theta)
    y_new = lu.solve(rhs)
    res = np.linalg.norm(M @ y_new - rhs)
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if not np.all(np.isfinite(y_new)) or res > SOLVER_RTOL * scale:
        raise SolverFailure(f"implicit solve residual {res / scale:.3g} exceeds {SOLVER_RTOL}")
    return SimulationState(y_new, state.t + tau, state.k + 1)


class Integrator:
    """Repeated stepping of one system with fixed inputs (one schedule segment).

    The explicit update performs exactly the arithmetic of :func:`step_explicit`
    with ``B @ g`` hoisted out of the loop.
    """

    def __init__(self, sys: SemiDiscreteSystem, g: np.ndarray, theta: float = 0.0):
        self.sys = sys
        self.g = np.asarray(g, dtype=float)
        self.theta = theta
        self.bg = sys.B @ self.g

    def step(self, y: np.ndarray, tau: float) -> np.ndarray:
        if self.theta == 0.0:
            return y + tau * (self.sys.A @ y + self.bg)
        return step_theta(SimulationState(y), self.sys, self.sys, self.g, self.g, tau, self.theta).y
