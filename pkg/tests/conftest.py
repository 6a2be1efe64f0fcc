import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from lnprivacy.graph import Channel, FeePolicy, NetworkGraph, NodeAttributes  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_graph(channels, nodes=None, client="lnd"):
    """Graph from ``(cid, a, b, cap_sat, policy_a, policy_b[, public[, balance_a_msat]])`` tuples."""
    graph = NetworkGraph()
    names = nodes or sorted({n for c in channels for n in c[1:3]})
    for nid in names:
        graph.add_node(nid, NodeAttributes(client=client, address_class="ipv4", location="eu"))
    for c in channels:
        cid, a, b, cap = c[:4]
        p1 = c[4] if len(c) > 4 else FeePolicy.zero()
        p2 = c[5] if len(c) > 5 else FeePolicy.zero()
        public = c[6] if len(c) > 6 else True
        bal = c[7] if len(c) > 7 else None
        graph.add_channel(Channel(cid, a, b, cap, p1, p2, public, bal))
    return graph


@pytest.fixture
def line_graph():
    """A - B - C with 1000 msat base fees and balances on the sending side."""
    pol = FeePolicy(1000, 0, 40)
    return make_graph([
        ("ab", "A", "B", 100_000, pol, pol, True, 60_000_000),
        ("bc", "B", "C", 50_000, pol, pol, True, 30_000_000),
    ])


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
