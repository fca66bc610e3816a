import numpy as np
import pytest

from geostore.assembly import MaterialParams, PumpMode, assemble
from geostore.grid import build_grid, grid_from_steps, index_maps, phx_geometry
from geostore.testkit import oracle_geometries


@pytest.fixture(scope="session")
def mat():
    return MaterialParams()


@pytest.fixture(scope="session")
def ref_grid():
    return grid_from_steps(phx_geometry([0.5], 0.02), 0.1, 0.01)


@pytest.fixture(scope="session")
def ref_systems(ref_grid, mat):
    maps = index_maps(ref_grid)
    return {m: assemble(ref_grid, maps, mat, m) for m in PumpMode}


@pytest.fixture(scope="session")
def small_grid():
    # N_x = 4, N_y = 6, interfaces at j = 2, 4
    return build_grid(phx_geometry([0.5], 2 / 6, l_x=1.0, l_y=1.0, l_z=1.0), 4, 6)


ORACLE_CASES = oracle_geometries()


@pytest.fixture(params=ORACLE_CASES, ids=[c[0] for c in ORACLE_CASES])
def oracle_case(request):
    return request.param


def random_state(n, seed=0, lo=5.0, hi=45.0):
    return np.random.default_rng(seed).uniform(lo, hi, n)


# ---------------------------------------------------------------------------
# one summary line per acceptance criterion

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "details": []})
    entry["ok"] &= rep.passed
    entry["details"] += [str(v) for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        detail = "; ".join(dict.fromkeys(e["details"]))
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {e['title']}" + (f"  [{detail}]" if detail else ""))
