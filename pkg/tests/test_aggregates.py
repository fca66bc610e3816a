import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geostore.aggregates import (RectNotAligned, RectTooThin, SegmentNotAligned, WindowOutOfRange,
                                 aggregation_operators, boundary_average_operator, energy_report,
                                 heat_content, rate_bottom, rate_phx, rate_phx_flow, rect_average_operator,
                                 rect_from_coords, trapezoid_weights, _from_point_weights)
from geostore.assembly import MaterialParams, PumpMode, assemble, input_function
from geostore.grid import grid_from_steps, index_maps, phx_geometry
from geostore.scenario import Schedule, Segment, SegmentKind, run
from geostore.stepping import Integrator, SchemeConfig, stability_limit


@pytest.fixture(scope="module")
def ops_on(ref_systems):
    return aggregation_operators(ref_systems[PumpMode.ON])


def test_trapezoid_3x3():
    w = np.outer(trapezoid_weights(0, 2), trapezoid_weights(0, 2))
    assert w[0, 0] == 1 / 16 and w[0, 1] == 1 / 8 and w[1, 1] == 1 / 4
    assert w.sum() == 1.0


def test_rect_errors(ref_systems):
    sys = ref_systems[PumpMode.ON]
    with pytest.raises(RectTooThin):
        rect_average_operator(sys, (0, 1, 0, 10))
    with pytest.raises(RectNotAligned):
        rect_average_operator(sys, (0, 200, 0, 10))
    with pytest.raises(RectNotAligned):
        rect_from_coords(sys.grid, 0.0, 1.05, 0.0, 0.5)
    with pytest.raises(SegmentNotAligned):
        boundary_average_operator(sys, "bottom", 3, 4)
    with pytest.raises(SegmentNotAligned):
        boundary_average_operator(sys, "diagonal", 0, 10)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-20, 80), i0=st.integers(0, 50), di=st.integers(2, 50), j0=st.integers(0, 50),
       dj=st.integers(2, 50))
def test_uniform_state_maps_to_itself(ref_systems, c, i0, di, j0, dj):
    for sys in ref_systems.values():
        g = np.array([c if sys.mode is PumpMode.ON else 0.0, c])
        f = rect_average_operator(sys, (i0, i0 + di, j0, j0 + dj))
        assert f(np.full(sys.n, c), g) == pytest.approx(c, abs=1e-11 * max(1, abs(c)))


def test_operators_normalised(ops_on):
    y = np.full(ops_on.sys.n, 23.0)
    g = np.array([23.0, 23.0])
    for v in ops_on.averages(y, g).values():
        assert v == pytest.approx(23.0, abs=1e-12)
    assert ops_on.area_M + ops_on.area_F == pytest.approx(ops_on.area)
    assert ops_on.area_F == pytest.approx(10 * 0.02)


def test_storage_decomposition(ops_on):
    lhs = ops_on.c_S
    w_m, w_f = ops_on.area_M / ops_on.area, ops_on.area_F / ops_on.area
    assert np.allclose(lhs.row, w_m * ops_on.c_M.row + w_f * ops_on.c_F.row, rtol=0, atol=1e-15)
    assert np.allclose(lhs.offset, w_m * ops_on.c_M.offset + w_f * ops_on.c_F.offset, rtol=0, atol=1e-15)


def test_quadratic_field_second_order():
    # trapezoid average of x^2 over [0, l_x] x [0, l_y] has error h_x^2 / 6
    errs = []
    for h in (0.5, 0.25, 0.125):
        grid = grid_from_steps(phx_geometry([], 0.02, l_x=2.0, l_y=1.0), h, 0.1)
        w = np.zeros(grid.labels.shape)
        w[:, :] = np.outer(trapezoid_weights(0, grid.n_x), trapezoid_weights(0, grid.n_y))
        field = np.broadcast_to(grid.x[:, None] ** 2, w.shape)
        avg = float((w * field).sum())
        errs.append(avg - 4.0 / 3.0)
        assert avg - 4.0 / 3.0 == pytest.approx(h ** 2 / 6, rel=1e-10)
    assert errs[0] / errs[1] == pytest.approx(4.0)


def test_rate_examples(ops_on, ref_systems):
    y = np.full(ops_on.sys.n, 10.0)
    assert rate_phx(ops_on, y, np.array([40.0, 15.0])) == pytest.approx(998 * 4182 * 0.01 * 0.02 * 10 * 30)
    assert rate_phx(ops_on, y, np.array([40.0, 15.0])) == pytest.approx(2.504e5, rel=1e-3)
    assert rate_phx(ops_on, y, np.array([10.0, 15.0])) == 0.0
    off = aggregation_operators(ref_systems[PumpMode.OFF])
    assert rate_phx(off, y, np.array([0.0, 15.0])) == 0.0
    y20 = np.full(ops_on.sys.n, 20.0)
    g = np.array([20.0, 15.0])
    assert ops_on.c_Bot(y20, g) == pytest.approx(19.704, abs=1e-3)
    assert rate_bottom(ops_on, y20, g) == pytest.approx(1000 * (15 - (1.59 * 20 + 1.5) / 1.69))
    assert rate_bottom(ops_on, y, g) > 0


def test_outlet_combination_weights():
    grid = grid_from_steps(phx_geometry([0.3, 0.7], 0.04), 0.5, 0.01)
    sys = assemble(grid, index_maps(grid), MaterialParams(), PumpMode.ON)
    ops = aggregation_operators(sys)
    parts = [boundary_average_operator(sys, "right", r.lower, r.upper) for r in grid.phx_rows]
    assert np.allclose(ops.c_O.row, 0.5 * (parts[0].row + parts[1].row))
    assert ops.length_O == pytest.approx(0.08)


def _series(**cols):
    from geostore.scenario import TimeSeries
    return TimeSeries({k: np.asarray(v, dtype=float) for k, v in cols.items()})


def test_energy_report_window():
    geo = phx_geometry([0.5], 0.02)
    s = _series(t=[0, 60, 120], Q_M=[10, 11, 12], Q_F=[10, 20, 30], G_P=[0, 5, 9], G_B=[0, -1, -2])
    mat = MaterialParams()
    same = energy_report(s, mat, geo, 60, 60)
    assert (same.G_M, same.G_F, same.G_P, same.G_B) == (0, 0, 0, 0)
    rep = energy_report(s, mat, geo)
    assert rep.G_M == pytest.approx(mat.heat_capacity_M * (10 - 0.2) * 10 * 2)
    assert rep.G_S == rep.G_M + rep.G_F
    with pytest.raises(WindowOutOfRange):
        energy_report(s, mat, geo, 0, 90)


def test_isolated_storage_keeps_energy():
    mat = MaterialParams(lambda_G=0.0)
    grid = grid_from_steps(phx_geometry([0.5], 0.02), 0.5, 0.01)
    y0 = np.where(np.arange(grid.n) % 7 == 0, 30.0, 10.0)
    sched = Schedule(y0, (Segment(SegmentKind.WAIT, 3600.0),), stride=600)
    res = run(sched, grid, mat, SchemeConfig(tau=stability_limit(mat, grid)))
    rep = energy_report(res.series, mat, grid.geometry)
    assert rep.G_P == 0 and rep.G_B == 0
    # the nodal content is exactly conserved; the quadrature gain only to discretisation accuracy
    from geostore.scenario import OriginalModel
    sys = OriginalModel(grid, mat).systems[PumpMode.OFF]
    assert heat_content(sys, res.final_y) == pytest.approx(heat_content(sys, np.asarray(y0, float)), rel=1e-13)


@pytest.mark.parametrize("h_y", [0.01, 0.005])
def test_nodal_energy_balance_with_flow_rate(mat, h_y):
    grid = grid_from_steps(phx_geometry([0.5], 0.02), 0.2, h_y)
    sys = assemble(grid, index_maps(grid), mat, PumpMode.ON)
    ops = aggregation_operators(sys)
    g = input_function(PumpMode.ON, 40.0, 15.0)
    tau = min(8.0, stability_limit(mat, grid))
    y = np.full(sys.n, 10.0)
    e0 = heat_content(sys, y)
    integ = Integrator(sys, g)
    gp = gb = 0.0
    rp, rb = rate_phx_flow(ops, y, g), rate_bottom(ops, y, g)
    for _ in range(int(4 * 3600 / tau)):
        y = integ.step(y, tau)
        rp1, rb1 = rate_phx_flow(ops, y, g), rate_bottom(ops, y, g)
        gp += 0.5 * tau * (rp + rp1)
        gb += 0.5 * tau * (rb + rb1)
        rp, rb = rp1, rb1
    de = heat_content(sys, y) - e0
    assert abs(de - gp - gb) <= 5e-3 * (abs(gp) + abs(gb))
