import numpy as np
import pytest

from lbmarl.sim import build_topology, init_state, load_scenario
from lbmarl.sim.core import SimParams
from lbmarl.sim.scenario import TrafficScenario


def make_scenario(total=4, active=None, **kw):
    active = total if active is None else active
    base = dict(scenario_id="A", day=1, total_ues=total, active_ues=active, idle_ues=total - active,
                mean_packet_size=0.41)
    base.update(kw)
    return TrafficScenario(**base)


def make_state(n_bs=1, scenario=None, seed=0, params=None, lb_enabled=True):
    scenario = scenario or load_scenario("A")
    topo = build_topology(n_bs, 500.0)
    return init_state(topo, scenario, np.random.default_rng(seed), params or SimParams(),
                      lb_enabled=lb_enabled)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results):
            terminalreporter.write_line(line)
