"""Seeded generator for Lightning-like snapshots.

Real snapshots are not bundled, so experiments run on degree-skewed random
topologies: a Chung-Lu multigraph over power-law expected degrees, patched to
be connected, with capacities and fee policies drawn from broad
distributions resembling the public network.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ._validation import check_probability, check_rng
from .exceptions import ConfigError
from .graph import (ONION, Channel, FeePolicy, LatencyTable, NetworkGraph, NodeAttributes,
                    address_class_of)

MAX_CHANNEL_SAT = 16_777_215

_BASE_FEES = np.array([0, 1000, 1000, 1000, 1000, 1000, 2000, 5000])
_FEE_RATES = np.array([1, 1, 1, 1, 10, 100, 500, 1000])
_CLTV = np.array([40, 40, 40, 144, 144, 14, 9, 80])


def _node_id(rng: np.random.Generator) -> str:
    return "02" + hashlib.sha256(rng.bytes(16)).hexdigest()


def _address(rng: np.random.Generator, idx: int) -> list[str]:
    u = rng.random()
    if u < 0.55:
        a, b, c, d = rng.integers(1, 255, size=4)
        return [f"{a}.{b}.{c}.{d}:9735"]
    if u < 0.65:
        return [f"[2001:db8::{idx:x}]:9735"]
    return [hashlib.sha256(rng.bytes(8)).hexdigest()[:56] + ".onion:9735"]


def expected_degrees(n_nodes: int, mean_degree: float, exponent: float,
                     max_degree: int) -> np.ndarray:
    """Power-law expected degrees scaled to ``mean_degree`` and capped."""
    ranks = np.arange(1, n_nodes + 1, dtype=float)
    w = ranks ** (-1.0 / (exponent - 1.0))
    for _ in range(50):
        w = w * (mean_degree * n_nodes / w.sum())
        w = np.minimum(w, max_degree)
    return np.maximum(w, 1.0)


def synthetic_snapshot(n_nodes: int = 300, *, mean_degree: float = 6.0,
                       exponent: float = 2.1, max_degree: int | None = None,
                       private_fraction: float = 0.0, declared_client_fraction: float = 0.1,
                       seed=None, latency_table: LatencyTable | None = None) -> NetworkGraph:
    """Generate a connected, degree-skewed channel graph without balances."""
    if n_nodes < 2:
        raise ConfigError("a snapshot needs at least two nodes")
    if mean_degree <= 0 or exponent <= 1:
        raise ConfigError("mean_degree must be positive and exponent > 1")
    check_probability(private_fraction, "private_fraction")
    check_probability(declared_client_fraction, "declared_client_fraction")
    rng = check_rng(seed)
    max_degree = n_nodes - 1 if max_degree is None else int(max_degree)

    weights = expected_degrees(n_nodes, mean_degree, exponent, max_degree)
    prob = weights / weights.sum()
    n_edges = int(round(weights.sum() / 2))
    ends = rng.choice(n_nodes, size=(n_edges, 2), p=prob)
    pairs = [tuple(sorted(map(int, e))) for e in ends if e[0] != e[1]]

    degree = np.zeros(n_nodes, dtype=int)
    for a, b in pairs:
        degree[a] += 1
        degree[b] += 1
    for v in np.flatnonzero(degree == 0):
        u = int(v)
        while u == v:
            u = int(rng.choice(n_nodes, p=prob))
        pairs.append(tuple(sorted((int(v), u))))

    # stitch components onto the heaviest node's component
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        parent[find(a)] = find(b)
    hub_root = find(0)
    for v in range(n_nodes):
        if find(v) != hub_root:
            pairs.append((0, v) if v != 0 else (0, 1))
            parent[find(v)] = hub_root

    graph = NetworkGraph(latency_table)
    ids = []
    for i in range(n_nodes):
        nid = _node_id(rng)
        ids.append(nid)
        client = None
        if rng.random() < declared_client_fraction:
            client = str(rng.choice(["lnd", "lnd", "lnd", "lnd", "c-lightning", "eclair"]))
        graph.add_node(nid, NodeAttributes(client=client, addresses=tuple(_address(rng, i))))
    for nid in ids:
        attrs = graph.nodes[nid]
        attrs.address_class = address_class_of(attrs.addresses)
        if attrs.address_class == ONION:
            attrs.location = ONION

    caps = np.exp(rng.normal(np.log(1_500_000), 1.2, size=len(pairs)))
    caps = np.clip(caps, 20_000, MAX_CHANNEL_SAT).astype(int)
    for k, (a, b) in enumerate(pairs):
        policies = []
        for _ in range(2):
            policies.append(FeePolicy(int(rng.choice(_BASE_FEES)), int(rng.choice(_FEE_RATES)),
                                      int(rng.choice(_CLTV))))
        public = bool(rng.random() >= private_fraction)
        cid = f"{550000 + k}x{k % 97}x{k % 2}"
        graph.add_channel(Channel(cid, ids[a], ids[b], int(caps[k]), policies[0], policies[1], public))
    return graph
