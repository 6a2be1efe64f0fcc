"""Balance discovery by probing, network snapshots and attacker cost.

The attacker learns a channel's balance by sending unpayable probes through
it and binary-searching on the amount.  Network snapshots apply that to every
channel the attacker can reach, with a per-channel chance that probing fails
(the node is offline, say) and the channel stays unknown.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_nonnegative, check_probability, check_rng
from .exceptions import ConfigError
from .graph import NetworkGraph

SAT_PER_BTC = 100_000_000
COVERAGES = ("generic", "oracle_aided")
DEFAULT_PROBE_SECONDS = 30.0


class ProbeOracle:
    """Answers whether ``amt`` sat fits through a channel direction.

    A probe that fits may still come back as a failure with probability
    ``failure_probability``; a probe that does not fit never succeeds.
    An unavailable oracle answers ``None`` to every probe.
    """

    def __init__(self, true_balance: int, failure_probability: float = 0.0, seed=None,
                 available: bool = True):
        if true_balance < 0:
            raise ValueError("balance must be non-negative")
        self.true_balance = int(true_balance)
        self.failure_probability = check_probability(failure_probability, "failure_probability")
        self.available = available
        self._rng = check_rng(seed)
        self.queries = 0

    def query(self, amt: int) -> bool | None:
        self.queries += 1
        if not self.available:
            return None
        if amt > self.true_balance:
            return False
        if self.failure_probability and self._rng.random() < self.failure_probability:
            return False
        return True


def probe_balance(oracle: ProbeOracle, capacity: int, retries_per_probe: int = 0
                  ) -> tuple[int | None, int]:
    """Binary search for the largest deliverable amount.

    A failed probe is repeated up to ``retries_per_probe`` more times before
    the failure is believed.  Returns ``(estimate, probes_used)``; the
    estimate is ``None`` when the oracle never answers.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    if retries_per_probe < 0:
        raise ValueError("retries_per_probe must be >= 0")
    lo, hi = 0, int(capacity)
    used = 0
    while lo < hi:
        mid = (lo + hi + 1) // 2
        delivered = False
        for _ in range(retries_per_probe + 1):
            used += 1
            answer = oracle.query(mid)
            if answer is None:
                return None, used
            if answer:
                delivered = True
                break
        if delivered:
            lo = mid
        else:
            hi = mid - 1
    return lo, used


@dataclass
class Snapshot:
    """Balances per (cid, direction) in sat; ``None`` marks an unknown entry.

    Direction 0 is what node1 can send, direction 1 what node2 can send.
    """

    time: float
    balances: dict[tuple[str, int], int | None] = field(default_factory=dict)

    def known(self) -> set[str]:
        return {cid for (cid, d), v in self.balances.items() if d == 0 and v is not None}

    def get(self, cid: str, direction: int = 0) -> int | None:
        return self.balances.get((cid, direction))


def probeable(channel, attacker_connected, coverage: str) -> bool:
    if not channel.public:
        return False
    a, b = channel.node1 in attacker_connected, channel.node2 in attacker_connected
    if coverage == "generic":
        return a and b
    if coverage == "oracle_aided":
        return a or b
    raise ConfigError(f"coverage must be one of {COVERAGES}, got {coverage!r}")


def snapshot_network(graph: NetworkGraph, attacker_connected, coverage: str = "generic",
                     failure_probability: float = 0.0, seed=None, time: float = 0.0) -> Snapshot:
    """Balances the attacker can read off ``graph`` at ``time``.

    One uniform draw per channel (in cid order) decides probe failure, so
    generic and oracle-aided snapshots with the same seed differ only in
    coverage.  Probing is exact, so known entries are read directly.
    """
    check_probability(failure_probability, "failure_probability")
    if coverage not in COVERAGES:
        raise ConfigError(f"coverage must be one of {COVERAGES}, got {coverage!r}")
    connected = set(attacker_connected)
    unknown_nodes = connected - set(graph.nodes)
    if unknown_nodes:
        raise ValueError(f"attacker connected to unknown nodes: {sorted(unknown_nodes)[:3]}")
    rng = check_rng(seed)
    channels = graph.sorted_channels()
    draws = rng.random(len(channels))
    snap = Snapshot(time)
    for ch, u in zip(channels, draws):
        value = None
        if probeable(ch, connected, coverage) and u >= failure_probability:
            value = ch.balance_a_to_b
        snap.balances[(ch.cid, 0)] = value
        snap.balances[(ch.cid, 1)] = None if value is None else ch.capacity_sat - value
    return snap


def snapshot_duration_s(n_channels: int, probe_seconds: float = DEFAULT_PROBE_SECONDS) -> float:
    """Wall time a sequential attacker needs to probe ``n_channels``."""
    return n_channels * probe_seconds


def top_degree_nodes(graph: NetworkGraph, n: int) -> list[str]:
    """The ``n`` nodes with most channels (ties by id); ``n`` is clamped."""
    order = sorted(graph.nodes, key=lambda nid: (-graph.degree(nid), nid))
    return order[:max(0, min(n, len(order)))]


SNAPSHOT_FIELDS = ["time_ms", "cid", "direction", "balance_sat"]


def write_snapshots(snapshots, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_FIELDS)
        for snap in snapshots:
            for (cid, d), v in sorted(snap.balances.items()):
                writer.writerow([f"{snap.time:.3f}", cid, d, "unknown" if v is None else v])


def read_snapshots(path) -> list[Snapshot]:
    snaps: dict[float, Snapshot] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            t = float(row["time_ms"])
            snap = snaps.setdefault(t, Snapshot(t))
            v = row["balance_sat"]
            snap.balances[(row["cid"], int(row["direction"]))] = None if v == "unknown" else int(v)
    return [snaps[t] for t in sorted(snaps)]


@dataclass(frozen=True)
class CostReport:
    channels: int
    open_close_fee_btc: float
    fees_btc: float
    reserve_btc: float
    liquidity_purchase_btc: float
    spent_btc: float
    on_hold_btc: float


def attack_cost(graph: NetworkGraph | None = None, channels_to_open: int | None = None,
                per_channel_capacity: float | None = None, liquidity_price=None, *,
                open_close_fee: float = 0.00043, reserve_fraction: float = 0.01) -> CostReport:
    """Money the attacker spends and locks up to probe through ``channels_to_open`` channels.

    Each channel costs one opening and one closing transaction fee.  The
    locked amount is the channels' capacity, of which ``reserve_fraction`` is
    the reserve.  ``liquidity_price = (cost_btc, capacity_btc)`` buys incoming
    capacity in lots, enough to mirror the outgoing capacity.

    With a graph, missing arguments default to one channel per node that has
    a public channel and to the largest capacity in the graph.
    """
    if channels_to_open is None:
        if graph is None:
            raise ConfigError("need channels_to_open or a graph")
        channels_to_open = sum(1 for nid in graph.nodes
                               if any(ch.public for ch in graph.channels_of(nid)))
    if per_channel_capacity is None:
        if graph is None:
            raise ConfigError("need per_channel_capacity or a graph")
        per_channel_capacity = graph.max_capacity_sat / SAT_PER_BTC
    if int(channels_to_open) != channels_to_open or channels_to_open < 0:
        raise ConfigError("channels_to_open must be a non-negative integer")
    check_nonnegative(per_channel_capacity, "per_channel_capacity")
    check_nonnegative(open_close_fee, "open_close_fee")
    check_probability(reserve_fraction, "reserve_fraction")
    n = int(channels_to_open)
    fees = n * 2 * open_close_fee
    on_hold = n * per_channel_capacity
    liquidity = 0.0
    if liquidity_price is not None and n:
        cost, lot = liquidity_price
        check_nonnegative(cost, "liquidity cost")
        if lot <= 0:
            raise ConfigError("liquidity lot capacity must be positive")
        liquidity = math.ceil(round(on_hold / lot, 12)) * cost
    return CostReport(
        channels=n,
        open_close_fee_btc=open_close_fee,
        fees_btc=fees,
        reserve_btc=on_hold * reserve_fraction,
        liquidity_purchase_btc=liquidity,
        spent_btc=fees + liquidity,
        on_hold_btc=on_hold,
    )


def unknown_fraction(snapshot: Snapshot) -> float:
    entries = [v for (_, d), v in snapshot.balances.items() if d == 0]
    return float(np.mean([v is None for v in entries])) if entries else 0.0
