"""Dense reference implementation for small grids.

Shares no assembly code with the production path.  Point roles are
re-classified from coordinates, and the boundary/interface relations are
solved as one dense linear system, not expanded recursively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import MaterialParams, PumpMode
from .grid import StorageGeometry

MAX_ORACLE_SIZE = 200


class OracleSizeExceeded(ValueError):
    pass


def _check_size(n: int) -> None:
    if n > MAX_ORACLE_SIZE:
        raise OracleSizeExceeded(f"n = {n} exceeds the oracle limit {MAX_ORACLE_SIZE}")


@dataclass(frozen=True)
class DenseOracle:
    A: np.ndarray
    B: np.ndarray
    C_lift: np.ndarray
    C_in: np.ndarray
    inner: np.ndarray   # (n, 2) grid indices, state order
    lifted: np.ndarray  # (n_bar, 2)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def _roles(geometry: StorageGeometry, n_x: int, n_y: int):
    h_y = geometry.l_y / n_y
    bands = [(int(round(p.lower / h_y)), int(round(p.upper / h_y))) for p in geometry.phxs]

    def role(i, j):
        if j == 0:
            return "bottom"
        if j == n_y:
            return "top"
        band = next(((lo, hi) for lo, hi in bands if lo <= j <= hi), None)
        if i == 0:
            return "inlet" if band else "left"
        if i == n_x:
            return "outlet" if band else "right"
        if band is None:
            return "medium"
        lo, hi = band
        if j == lo:
            return "iface_lo"
        if j == hi:
            return "iface_hi"
        return "fluid"

    return role


def build_oracle(geometry: StorageGeometry, n_x: int, n_y: int, mat: MaterialParams,
                 mode: PumpMode) -> DenseOracle:
    role = _roles(geometry, n_x, n_y)
    h_x, h_y = geometry.l_x / n_x, geometry.l_y / n_y
    pts = [(i, j) for i in range(n_x + 1) for j in range(n_y + 1)]
    inner = [p for p in pts if role(*p) in ("medium", "fluid")]
    lifted = [p for p in pts if role(*p) not in ("medium", "fluid")]
    n, nb = len(inner), len(lifted)
    _check_size(n)
    si = {p: k for k, p in enumerate(inner)}
    li = {p: k for k, p in enumerate(lifted)}

    # lifted values satisfy  Yb = P Yb + R Y + S g
    P = np.zeros((nb, nb))
    R = np.zeros((nb, n))
    S = np.zeros((nb, 2))
    wf = mat.kappa_F / (mat.kappa_F + mat.kappa_M)
    lam = mat.lambda_G * h_y

    def put(row, w, q):
        if q in si:
            R[row, si[q]] += w
        else:
            P[row, li[q]] += w

    for (i, j), r in li.items():
        kind = role(i, j)
        if kind == "bottom":
            put(r, mat.kappa_M / (mat.kappa_M + lam), (i, 1))
            S[r, 1] = lam / (mat.kappa_M + lam)
        elif kind == "top":
            put(r, 1.0, (i, n_y - 1))
        elif kind == "inlet" and mode is PumpMode.ON:
            S[r, 0] = 1.0
        elif kind in ("inlet", "left"):
            put(r, 1.0, (1, j))
        elif kind in ("outlet", "right"):
            put(r, 1.0, (n_x - 1, j))
        elif kind == "iface_lo":
            put(r, wf, (i, j + 1))
            put(r, 1.0 - wf, (i, j - 1))
        elif kind == "iface_hi":
            put(r, wf, (i, j - 1))
            put(r, 1.0 - wf, (i, j + 1))
    M = np.eye(nb) - P
    C_lift = np.linalg.solve(M, R)
    C_in = np.linalg.solve(M, S)

    # full-field operator on (Y, Yb), then eliminate Yb
    L_y = np.zeros((n, n))
    L_b = np.zeros((n, nb))
    v = mat.v_bar if mode is PumpMode.ON else 0.0
    for (i, j), k in si.items():
        fluid = role(i, j) == "fluid"
        a = mat.a_F if fluid else mat.a_M
        terms = [((i - 1, j), a / h_x ** 2), ((i + 1, j), a / h_x ** 2),
                 ((i, j - 1), a / h_y ** 2), ((i, j + 1), a / h_y ** 2),
                 ((i, j), -2 * a / h_x ** 2 - 2 * a / h_y ** 2)]
        if fluid and v:
            terms += [((i - 1, j), v / h_x), ((i, j), -v / h_x)]
        for q, c in terms:
            if q in si:
                L_y[k, si[q]] += c
            else:
                L_b[k, li[q]] += c
    A = L_y + L_b @ C_lift
    B = L_b @ C_in
    return DenseOracle(A, B, C_lift, C_in, np.array(inner), np.array(lifted))


def dense_step(y: np.ndarray, A: np.ndarray, B: np.ndarray, g: np.ndarray, tau: float) -> np.ndarray:
    _check_size(A.shape[0])
    return (np.eye(A.shape[0]) + tau * A) @ y + tau * (B @ g)


def spectral_radius(A: np.ndarray, tau: float) -> float:
    _check_size(A.shape[0])
    return float(np.max(np.abs(np.linalg.eigvals(np.eye(A.shape[0]) + tau * A))))


def oracle_geometries() -> list[tuple[str, StorageGeometry, int, int]]:
    """Small configurations covering every point role, both PHX counts and off-centre placement."""
    from .grid import PhxSpec

    out = []
    for n_x in (4, 8):
        # N_y = 6: one PHX spanning rows 2..4
        out.append((f"nx{n_x}-ny6-p1", StorageGeometry(1.0, 1.0, 1.0, (PhxSpec(0.5, 2 / 6),)), n_x, 6))
        # N_y = 10: one PHX low (near bottom), one off-centre, and two PHXs
        out.append((f"nx{n_x}-ny10-p1-low", StorageGeometry(1.0, 1.0, 1.0, (PhxSpec(0.3, 0.2),)), n_x, 10))
        out.append((f"nx{n_x}-ny10-p1-off", StorageGeometry(1.0, 1.0, 1.0, (PhxSpec(0.6, 0.2),)), n_x, 10))
        out.append((f"nx{n_x}-ny10-p2", StorageGeometry(1.0, 1.0, 1.0,
                                                       (PhxSpec(0.3, 0.2), PhxSpec(0.7, 0.2))), n_x, 10))
    return out
