"""Independent reference implementations used as test oracles."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from lnprivacy.graph import Hop
from lnprivacy.pathfind import edge_weight, hop_fee


def enumerate_paths(graph, sender, recipient, amt, client, params, max_nodes=20):
    """All admissible simple paths with exact weights, sorted by selection key."""
    max_cap = graph.max_capacity_sat
    out = []

    def admissible(ch):
        return ch.public or {sender, recipient} & {ch.node1, ch.node2}

    def walk(node, visited, hops):
        if node == recipient:
            amounts = [amt]
            for hop in reversed(hops[1:]):
                policy = graph.channels[hop.cid].policy_from(hop.src)
                amounts.append(amounts[-1] + hop_fee(policy, amounts[-1]))
            amounts.reverse()
            weight = Fraction(0)
            for hop, a in zip(hops, amounts):
                ch = graph.channels[hop.cid]
                if ch.capacity_sat * 1000 < a:
                    return
                weight += edge_weight(client, ch, hop.src, a, params, max_cap)
            out.append(((weight, len(hops), tuple(h.cid for h in hops)), tuple(hops), tuple(amounts)))
            return
        if len(visited) >= max_nodes:
            return
        for ch in graph.channels_of(node):
            if not admissible(ch):
                continue
            nxt = ch.other(node)
            if nxt in visited:
                continue
            walk(nxt, visited | {nxt}, hops + [Hop(ch.cid, node, nxt)])

    walk(sender, {sender}, [])
    out.sort(key=lambda item: item[0])
    return out


def random_graph(rng, n_nodes, n_channels, private_fraction=0.0, fee_scale=1):
    """Small multigraph with varied policies; node ids are short strings."""
    from lnprivacy.graph import Channel, FeePolicy, NetworkGraph, NodeAttributes

    graph = NetworkGraph()
    nodes = [f"n{i}" for i in range(n_nodes)]
    for nid in nodes:
        graph.add_node(nid, NodeAttributes(client="lnd", location="eu", address_class="ipv4"))
    for k in range(n_channels):
        a, b = rng.choice(n_nodes, size=2, replace=False)
        pols = [FeePolicy(int(rng.integers(0, 3000)) * fee_scale, int(rng.integers(0, 5000)),
                          int(rng.choice([6, 9, 14, 40, 144]))) for _ in range(2)]
        cap = int(rng.choice([1, 5, 20, 100, 1000]))
        graph.add_channel(Channel(f"c{k:03d}", nodes[a], nodes[b], cap, pols[0], pols[1],
                                  bool(rng.random() >= private_fraction)))
    return graph


def disjoint_instance(rng, max_nodes=10, max_payments=3):
    """Random graph plus up to three payments on node-disjoint paths.

    Returns ``(graph, before, after, payments)`` where ``payments`` holds
    ``(sender, recipient, amount_sat)`` and the snapshots know every channel.
    Amounts are whole satoshis, pairwise more than two satoshis apart.
    """
    from lnprivacy.graph import Channel, FeePolicy, NetworkGraph, NodeAttributes
    from lnprivacy.pathfind import path_amounts
    from lnprivacy.probe import snapshot_network

    n = int(rng.integers(4, max_nodes + 1))
    nodes = [f"v{i}" for i in range(n)]
    order = list(rng.permutation(nodes))
    k = int(rng.integers(1, max_payments + 1))
    cuts = sorted(rng.choice(range(2, n - 1), size=min(k - 1, max(0, n - 3)), replace=False)) \
        if n > 3 else []
    segments = [seg for seg in np.split(np.array(order), cuts) if len(seg) >= 2]
    graph = NetworkGraph()
    for nid in nodes:
        graph.add_node(nid, NodeAttributes(client="lnd", location="eu", address_class="ipv4"))
    cid = 0

    def policy():
        return FeePolicy(int(rng.integers(0, 5)) * 1000, int(rng.choice([0, 1, 100, 1000])), 40)

    paths = []
    for seg in segments:
        hops = []
        for a, b in zip(seg, seg[1:]):
            ch = Channel(f"p{cid:02d}", str(a), str(b), 10_000_000, policy(), policy(),
                         True, 5_000_000_000)
            graph.add_channel(ch)
            hops.append((ch.cid, str(a), str(b)))
            cid += 1
        paths.append(hops)
    for _ in range(int(rng.integers(0, n))):  # idle channels stay unchanged
        a, b = rng.choice(nodes, size=2, replace=False)
        graph.add_channel(Channel(f"q{cid:02d}", str(a), str(b), 1_000_000, policy(), policy(),
                                  True, 500_000_000))
        cid += 1
    amounts = []
    while len(amounts) < len(paths):
        amt = int(rng.integers(1_000, 2_000_000))
        if all(abs(amt - x) > 2 for x in amounts):
            amounts.append(amt)
    before = snapshot_network(graph, graph.nodes, "generic", time=0.0)
    from lnprivacy.graph import Hop
    payments = []
    for hops, amt in zip(paths, amounts):
        hop_objs = [Hop(*h) for h in hops]
        for hop, a in zip(hop_objs, path_amounts(graph, hop_objs, amt * 1000)):
            graph.channels[hop.cid].transfer(hop.src, a)
        payments.append((hops[0][1], hops[-1][2], amt))
    after = snapshot_network(graph, graph.nodes, "generic", time=1.0)
    return graph, before, after, payments
