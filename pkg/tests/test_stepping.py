import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geostore.assembly import MaterialParams, PumpMode, assemble, input_function
from geostore.grid import build_grid, index_maps, phx_geometry
from geostore.stepping import (Integrator, SchemeConfig, SimulationState, StabilityViolation,
                               stability_limit, step_explicit, step_theta)

from conftest import random_state


def test_stability_limit_reference(ref_grid, mat):
    assert stability_limit(mat, ref_grid) == pytest.approx(8.328, abs=1e-3)


def test_stability_limit_pure_diffusion():
    a = 1e-6
    mat = MaterialParams(kappa_M=a * 1.6e6, kappa_F=a * 998 * 4182, v_bar=1e-30)
    geo = phx_geometry([0.5], 0.2, l_x=1.0, l_y=1.0)
    g1 = build_grid(geo, 10, 10)
    assert stability_limit(mat, g1) == pytest.approx(0.1 ** 2 / (4 * a), rel=1e-9)
    g2 = build_grid(phx_geometry([1.0], 0.4, l_x=2.0, l_y=2.0), 10, 10)
    assert stability_limit(mat, g2) == pytest.approx(4 * stability_limit(mat, g1), rel=1e-9)


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(tau=0)
    with pytest.raises(ValueError):
        SchemeConfig(theta=1.5)


def test_stationary_uniform(ref_systems, ref_grid):
    sys = ref_systems[PumpMode.ON]
    s = step_explicit(SimulationState(np.full(sys.n, 12.5)), sys, np.array([12.5, 12.5]), 8.0)
    assert np.allclose(s.y, 12.5, rtol=0, atol=1e-12)
    assert (s.t, s.k) == (8.0, 1)


def test_stability_enforced(ref_systems):
    sys = ref_systems[PumpMode.ON]
    with pytest.raises(StabilityViolation):
        step_explicit(SimulationState(np.zeros(sys.n)), sys, np.zeros(2), 10.0)
    step_explicit(SimulationState(np.zeros(sys.n)), sys, np.zeros(2), 10.0, enforce_stability=False)


def test_first_charging_step(ref_systems):
    sys = ref_systems[PumpMode.ON]
    y0 = np.full(sys.n, 10.0)
    y1 = step_explicit(SimulationState(y0), sys, np.array([40.0, 10.0]), 1.0).y
    inlet_adjacent = sys.maps.state_index(1, 50)
    assert y1[inlet_adjacent] > 10.0
    changed = np.flatnonzero(y1 != 10.0)
    assert list(changed) == [inlet_adjacent]


def test_theta_zero_is_explicit(small_grid, mat):
    maps = index_maps(small_grid)
    on, off = (assemble(small_grid, maps, mat, m) for m in PumpMode)
    y = random_state(on.n, 3)
    g = np.array([33.0, 14.0])
    tau = 0.9 * stability_limit(mat, small_grid)
    a = step_explicit(SimulationState(y), on, g, tau)
    b = step_theta(SimulationState(y), on, off, g, np.array([0.0, 14.0]), tau, 0.0)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(Integrator(on, g).step(y, tau), a.y)


@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_implicit_stationary(ref_systems, theta):
    sys = ref_systems[PumpMode.OFF]
    y = np.full(sys.n, 15.0)
    out = step_theta(SimulationState(y), sys, sys, np.array([0.0, 15.0]), np.array([0.0, 15.0]), 100.0, theta)
    assert np.allclose(out.y, 15.0, rtol=0, atol=1e-10)


def test_crank_nicolson_second_order(small_grid, mat):
    maps = index_maps(small_grid)
    sys = assemble(small_grid, maps, mat, PumpMode.ON)
    g = np.array([40.0, 15.0])
    xs = small_grid.x[maps.inner[:, 0]]
    ys = small_grid.y[maps.inner[:, 1]]
    y0 = 20 + 5 * np.cos(np.pi * xs) * np.cos(np.pi * ys)

    def advance(tau, theta, steps):
        y = y0.copy()
        for _ in range(steps):
            y = step_theta(SimulationState(y), sys, sys, g, g, tau, theta).y
        return y

    T = 40.0
    ref = advance(T / 2048, 0.5, 2048)
    errs = [np.max(np.abs(advance(T / m, 0.5, m) - ref)) for m in (8, 16, 32)]
    # halving tau cuts the error by about four; explicit is only first order
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
    e_expl = [np.max(np.abs(advance(T / m, 0.0, m) - ref)) for m in (16, 32)]
    assert 1.7 < e_expl[0] / e_expl[1] < 2.3
    assert errs[2] < e_expl[1]


@settings(max_examples=20, deadline=None)
@given(q0=st.floats(0, 50), q_in=st.floats(0, 50), q_g=st.floats(0, 50), frac=st.floats(0.05, 1.0),
       seed=st.integers(0, 2 ** 16))
def test_discrete_maximum_principle(small_grid, mat, q0, q_in, q_g, frac, seed):
    maps = index_maps(small_grid)
    systems = {m: assemble(small_grid, maps, mat, m) for m in PumpMode}
    tau = frac * stability_limit(mat, small_grid)
    rng = np.random.default_rng(seed)
    y = np.full(systems[PumpMode.ON].n, q0)
    lo, hi = min(q0, q_in, q_g), max(q0, q_in, q_g)
    for _ in range(60):
        mode = PumpMode.ON if rng.random() < 0.6 else PumpMode.OFF
        y = step_explicit(SimulationState(y), systems[mode], input_function(mode, q_in, q_g), tau).y
        assert y.min() >= lo - 1e-9 and y.max() <= hi + 1e-9


def test_deterministic(ref_systems):
    sys = ref_systems[PumpMode.ON]
    y0 = random_state(sys.n, 7)
    runs = []
    for _ in range(2):
        y = y0.copy()
        integ = Integrator(sys, np.array([40.0, 15.0]))
        for _ in range(20):
            y = integ.step(y, 8.0)
        runs.append(y)
    assert np.array_equal(*runs)


def test_pump_off_equilibrium_rate(mat):
    # the slowest pump-off mode decays at about 1.8e-6 1/s, so 1e-3 K needs roughly 4.7e6 s from a 5 K offset
    from scipy.sparse.linalg import eigs
    from geostore.grid import grid_from_steps
    grid = grid_from_steps(phx_geometry([0.5], 0.02), 1.0, 0.01)
    sys = assemble(grid, index_maps(grid), mat, PumpMode.OFF)
    slowest = np.max(eigs(sys.A.tocsc(), k=1, sigma=0, which="LM")[0].real)
    assert -2.5e-6 < slowest < -1.2e-6
    tau = stability_limit(mat, grid)
    bg = sys.B @ np.array([0.0, 15.0])
    y = np.full(grid.n, 10.0)
    errs = []
    for k in range(int(6e6 / tau) + 1):
        y = y + tau * (sys.A @ y + bg)
        if k % 3000 == 0:
            errs.append(np.max(np.abs(y - 15.0)))
    assert np.all(np.diff(errs[1:]) < 0)
    assert np.max(np.abs(y - 15.0)) <= 1e-3
