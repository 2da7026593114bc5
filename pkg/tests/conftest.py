from __future__ import annotations

import numpy as np
import pytest

import netreduce as nr
from netreduce.pipeline import reduce_network

from reference_values import IEEE14_CONNECTIONS

FIXTURE_GRIDS = ("six_bus", "ieee14", "ieee39")

_acceptance: list[tuple[str, str, str]] = []


@pytest.fixture(scope="session")
def ieee14():
    net = nr.read_case("ieee14")
    return net, nr.read_zones("ieee14", net)


@pytest.fixture(scope="session")
def ieee14_red(ieee14):
    net, za = ieee14
    return reduce_network(net, za, connections=IEEE14_CONNECTIONS)


@pytest.fixture(scope="session", params=FIXTURE_GRIDS)
def grid(request):
    net = nr.read_case(request.param)
    return net, nr.read_zones(request.param, net)


@pytest.fixture(scope="session")
def grid_red(grid):
    net, za = grid
    return reduce_network(net, za)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_bus_text(load=10.0, x=0.1):
    return f"""function mpc = two_bus
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;
    2 1 {load} 0 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [
    1 {load} 0 0 0 1 100 1 0 0;
];
mpc.branch = [
    1 2 0 {x} 0 0 0 0 0 0 1;
];
"""


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion
# ---------------------------------------------------------------------------


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = getattr(item, "acceptance_detail", "")
        _acceptance.append((crit.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion id")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in _acceptance:
        terminalreporter.write_line(f"{status} criterion {label}" + (f": {detail}" if detail else ""))
