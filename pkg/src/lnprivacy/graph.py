"""Network data model: nodes, channels, fee policies, snapshots and attributes.

Amounts are integer millisatoshis internally.  Channel capacities are whole
satoshis, as in gossip data, and ``balance1_msat + balance2_msat`` always
equals ``capacity_sat * 1000``.
"""

from __future__ import annotations

import copy
import csv
import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._validation import check_probability, check_rng
from .exceptions import ConfigError, DuplicateChannelError, SnapshotError

MSAT_PER_SAT = 1000
CLIENTS = ("lnd", "c-lightning", "eclair")
ADDRESS_CLASSES = ("ipv4", "ipv6", "onion")
ONION = "onion"


@dataclass(frozen=True)
class FeePolicy:
    """Routing policy one endpoint announces for its outgoing direction."""

    base_fee_msat: int = 1000
    fee_rate_ppm: int = 1
    cltv_delta: int = 40

    def __post_init__(self):
        for name in ("base_fee_msat", "fee_rate_ppm", "cltv_delta"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @classmethod
    def zero(cls) -> "FeePolicy":
        return cls(0, 0, 0)

    def to_dict(self) -> dict:
        return {
            "base_fee_msat": int(self.base_fee_msat),
            "fee_rate_ppm": int(self.fee_rate_ppm),
            "cltv_delta": int(self.cltv_delta),
        }


class Hop(NamedTuple):
    """One traversal of a channel from ``src`` to ``dst``."""

    cid: str
    src: str
    dst: str


@dataclass(eq=False)
class Channel:
    cid: str
    node1: str
    node2: str
    capacity_sat: int
    policy1: FeePolicy = field(default_factory=FeePolicy)
    policy2: FeePolicy = field(default_factory=FeePolicy)
    public: bool = True
    balance1_msat: int | None = None

    def __post_init__(self):
        if self.capacity_sat <= 0:
            raise ValueError(f"channel {self.cid}: capacity must be positive")
        if self.node1 == self.node2:
            raise ValueError(f"channel {self.cid}: endpoints must differ")
        if self.balance1_msat is not None and not 0 <= self.balance1_msat <= self.capacity_msat:
            raise ValueError(f"channel {self.cid}: balance outside [0, capacity]")

    @property
    def capacity_msat(self) -> int:
        return self.capacity_sat * MSAT_PER_SAT

    @property
    def endpoints(self) -> tuple[str, str]:
        return self.node1, self.node2

    @property
    def balance2_msat(self) -> int | None:
        if self.balance1_msat is None:
            return None
        return self.capacity_msat - self.balance1_msat

    @property
    def balance_a_to_b(self) -> int | None:
        """Satoshis node1 can send to node2 (floored)."""
        if self.balance1_msat is None:
            return None
        return self.balance1_msat // MSAT_PER_SAT

    @property
    def balance_b_to_a(self) -> int | None:
        if self.balance1_msat is None:
            return None
        return self.capacity_sat - self.balance_a_to_b

    def other(self, node: str) -> str:
        if node == self.node1:
            return self.node2
        if node == self.node2:
            return self.node1
        raise KeyError(f"{node} is not an endpoint of channel {self.cid}")

    def direction(self, src: str) -> int:
        """0 for node1 -> node2, 1 for node2 -> node1."""
        if src == self.node1:
            return 0
        if src == self.node2:
            return 1
        raise KeyError(f"{src} is not an endpoint of channel {self.cid}")

    def policy_from(self, src: str) -> FeePolicy:
        return self.policy1 if self.direction(src) == 0 else self.policy2

    def balance_from(self, src: str) -> int:
        """Outbound balance of ``src`` in msat."""
        if self.balance1_msat is None:
            raise ValueError(f"channel {self.cid} has no balance assigned")
        return self.balance1_msat if self.direction(src) == 0 else self.balance2_msat

    def transfer(self, src: str, amount_msat: int) -> None:
        """Move ``amount_msat`` from ``src``'s side to the other side."""
        available = self.balance_from(src)
        if amount_msat > available:
            raise ValueError(
                f"channel {self.cid}: {src} holds {available} msat, cannot send {amount_msat}"
            )
        if self.direction(src) == 0:
            self.balance1_msat -= amount_msat
        else:
            self.balance1_msat += amount_msat


@dataclass
class NodeAttributes:
    client: str | None = None
    address_class: str | None = None
    location: str | None = None
    addresses: tuple[str, ...] = ()


class LatencyTable:
    """Symmetric region-to-region one-way latency in milliseconds.

    Pairs missing from the table fall back to ``intra_ms`` (same region) or
    ``cross_ms``; any onion endpoint costs ``onion_ms``.
    """

    def __init__(self, pairs: Mapping[tuple[str, str], float] | None = None, *,
                 intra_ms: float = 30.0, cross_ms: float = 100.0, onion_ms: float = 400.0):
        self.intra_ms = float(intra_ms)
        self.cross_ms = float(cross_ms)
        self.onion_ms = float(onion_ms)
        self._pairs: dict[tuple[str, str], float] = {}
        regions = set()
        for (r1, r2), ms in (pairs or {}).items():
            if ms < 0:
                raise ConfigError(f"negative latency for {r1},{r2}")
            key = tuple(sorted((r1, r2)))
            if key in self._pairs and self._pairs[key] != float(ms):
                raise ConfigError(f"asymmetric latency entries for {r1},{r2}")
            self._pairs[key] = float(ms)
            if ONION not in (r1, r2):
                regions.update((r1, r2))
        self.regions = tuple(sorted(regions))

    @classmethod
    def from_csv(cls, path, **kwargs) -> "LatencyTable":
        """Read ``region1,region2,ms`` rows; ``onion`` rows set the Tor constant."""
        pairs = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 3:
                    raise ConfigError(f"{path}:{lineno}: expected region1,region2,ms")
                r1, r2, ms = (x.strip() for x in row)
                if lineno == 1 and r1 == "region1":
                    continue
                try:
                    value = float(ms)
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: latency {ms!r} is not a number") from None
                if ONION in (r1, r2):
                    kwargs.setdefault("onion_ms", value)
                    continue
                pairs[(r1, r2)] = value
        return cls(pairs, **kwargs)

    @classmethod
    def default(cls) -> "LatencyTable":
        ref = resources.files("lnprivacy") / "data" / "latency.csv"
        with resources.as_file(ref) as path:
            return cls.from_csv(path)

    def lookup(self, loc1: str | None, loc2: str | None) -> float:
        if loc1 == ONION or loc2 == ONION:
            return self.onion_ms
        key = tuple(sorted((str(loc1), str(loc2))))
        if key in self._pairs:
            return self._pairs[key]
        return self.intra_ms if loc1 == loc2 else self.cross_ms


class NetworkGraph:
    """Directed multigraph of nodes and channels.

    Channels are stored once; each can be traversed in both directions.  The
    structure is only mutated through :meth:`Channel.transfer` (balance
    updates) or while it is being built.
    """

    def __init__(self, latency_table: LatencyTable | None = None):
        self.nodes: dict[str, NodeAttributes] = {}
        self.channels: dict[str, Channel] = {}
        self.latency_table = latency_table or LatencyTable()
        self._adjacency: dict[str, list[str]] = {}

    def add_node(self, node_id: str, attrs: NodeAttributes | None = None) -> None:
        if not node_id:
            raise ValueError("node id must be non-empty")
        if node_id in self.nodes:
            raise ValueError(f"duplicate node {node_id}")
        self.nodes[node_id] = attrs or NodeAttributes()
        self._adjacency[node_id] = []

    def add_channel(self, channel: Channel) -> None:
        if channel.cid in self.channels:
            raise DuplicateChannelError(f"duplicate channel id {channel.cid}")
        for end in channel.endpoints:
            if end not in self.nodes:
                raise SnapshotError(f"channel {channel.cid} references unknown node {end}")
        self.channels[channel.cid] = channel
        self._adjacency[channel.node1].append(channel.cid)
        self._adjacency[channel.node2].append(channel.cid)

    def __len__(self) -> int:
        return len(self.nodes)

    def channels_of(self, node: str) -> list[Channel]:
        return [self.channels[cid] for cid in self._adjacency[node]]

    def degree(self, node: str) -> int:
        return len(self._adjacency[node])

    def node_ids(self) -> list[str]:
        return sorted(self.nodes)

    def sorted_channels(self) -> list[Channel]:
        return [self.channels[cid] for cid in sorted(self.channels)]

    @property
    def max_capacity_sat(self) -> int:
        return max((ch.capacity_sat for ch in self.channels.values()), default=0)

    @property
    def total_capacity_sat(self) -> int:
        return sum(ch.capacity_sat for ch in self.channels.values())

    def latency(self, u: str, v: str) -> float:
        a, b = self.nodes[u], self.nodes[v]
        if a.address_class == ONION or b.address_class == ONION:
            return self.latency_table.onion_ms
        return self.latency_table.lookup(a.location, b.location)

    def balances(self) -> dict[str, int]:
        """``cid -> balance1_msat`` for every channel (the mutable state)."""
        return {cid: ch.balance1_msat for cid, ch in self.channels.items()}

    def restore_balances(self, balances: Mapping[str, int]) -> None:
        for cid, value in balances.items():
            self.channels[cid].balance1_msat = value

    def copy(self) -> "NetworkGraph":
        return copy.deepcopy(self)

    def check_invariants(self) -> None:
        for ch in self.channels.values():
            if ch.node1 not in self.nodes or ch.node2 not in self.nodes:
                raise SnapshotError(f"channel {ch.cid} has a dangling endpoint")
            if ch.balance1_msat is not None and not 0 <= ch.balance1_msat <= ch.capacity_msat:
                raise AssertionError(f"channel {ch.cid} balance outside [0, capacity]")

    def to_dict(self) -> dict:
        nodes = []
        for nid in self.node_ids():
            attrs = self.nodes[nid]
            entry = {"id": nid, "addresses": list(attrs.addresses)}
            if attrs.client is not None:
                entry["client"] = attrs.client
            if attrs.location is not None and attrs.location != ONION:
                entry["region"] = attrs.location
            nodes.append(entry)
        channels = []
        for ch in self.sorted_channels():
            entry = {
                "cid": ch.cid,
                "node1": ch.node1,
                "node2": ch.node2,
                "capacity_sat": ch.capacity_sat,
                "policy1": ch.policy1.to_dict(),
                "policy2": ch.policy2.to_dict(),
                "public": ch.public,
            }
            if ch.balance1_msat is not None:
                entry["balance1_sat"] = ch.balance1_msat / MSAT_PER_SAT
            channels.append(entry)
        return {"nodes": nodes, "channels": channels}


# -- snapshot I/O ------------------------------------------------------------

_POLICY_KEYS = ("base_fee_msat", "fee_rate_ppm", "cltv_delta")


def _require(record: Mapping, key: str, where: str):
    if key not in record:
        raise SnapshotError(f"{where}: missing field {key!r}")
    return record[key]


def _parse_policy(raw, where: str) -> FeePolicy:
    if not isinstance(raw, Mapping):
        raise SnapshotError(f"{where}: policy must be an object")
    values = []
    for key in _POLICY_KEYS:
        value = _require(raw, key, where)
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise SnapshotError(f"{where}: {key} must be a non-negative integer")
        values.append(value)
    return FeePolicy(*values)


def address_class_of(addresses: Iterable[str]) -> str:
    """Classify a node's announced addresses; no IP address means onion-only."""
    kinds = set()
    for addr in addresses:
        host = addr.rsplit(":", 1)[0] if not addr.startswith("[") else addr
        if host.endswith(".onion"):
            kinds.add("onion")
        elif addr.startswith("[") or addr.count(":") > 1:
            kinds.add("ipv6")
        else:
            kinds.add("ipv4")
    if "ipv4" in kinds:
        return "ipv4"
    if "ipv6" in kinds:
        return "ipv6"
    return ONION


def graph_from_dict(data: Mapping, latency_table: LatencyTable | None = None) -> NetworkGraph:
    """Build a graph from an already-decoded snapshot document."""
    if not isinstance(data, Mapping) or "nodes" not in data or "channels" not in data:
        raise SnapshotError("snapshot must be an object with 'nodes' and 'channels'")
    graph = NetworkGraph(latency_table)
    for i, raw in enumerate(data["nodes"]):
        where = f"node record {i}"
        if not isinstance(raw, Mapping):
            raise SnapshotError(f"{where}: must be an object")
        nid = _require(raw, "id", where)
        if not isinstance(nid, str) or not nid:
            raise SnapshotError(f"{where}: id must be a non-empty string")
        where = f"node {nid}"
        if nid in graph.nodes:
            raise SnapshotError(f"{where}: duplicate node id")
        addresses = raw.get("addresses", [])
        if not isinstance(addresses, list) or not all(isinstance(a, str) for a in addresses):
            raise SnapshotError(f"{where}: addresses must be a list of strings")
        client = raw.get("client")
        if client is not None and client not in CLIENTS:
            raise SnapshotError(f"{where}: unknown client {client!r}")
        aclass = address_class_of(addresses)
        location = ONION if aclass == ONION else raw.get("region")
        graph.add_node(nid, NodeAttributes(client, aclass, location, tuple(addresses)))
    for i, raw in enumerate(data["channels"]):
        if not isinstance(raw, Mapping):
            raise SnapshotError(f"channel record {i}: must be an object")
        cid = _require(raw, "cid", f"channel record {i}")
        where = f"channel {cid}"
        node1 = _require(raw, "node1", where)
        node2 = _require(raw, "node2", where)
        capacity = _require(raw, "capacity_sat", where)
        if isinstance(capacity, bool) or not isinstance(capacity, int) or capacity <= 0:
            raise SnapshotError(f"{where}: capacity_sat must be a positive integer")
        public = _require(raw, "public", where)
        if not isinstance(public, bool):
            raise SnapshotError(f"{where}: public must be a boolean")
        policy1 = _parse_policy(_require(raw, "policy1", where), where + " policy1")
        policy2 = _parse_policy(_require(raw, "policy2", where), where + " policy2")
        for end in (node1, node2):
            if end not in graph.nodes:
                raise SnapshotError(f"{where}: references unknown node {end!r}")
        if node1 == node2:
            raise SnapshotError(f"{where}: endpoints must differ")
        balance = None
        if raw.get("balance1_sat") is not None:
            b = raw["balance1_sat"]
            if isinstance(b, bool) or not isinstance(b, (int, float)) or not 0 <= b <= capacity:
                raise SnapshotError(f"{where}: balance1_sat must lie in [0, capacity_sat]")
            balance = int(round(b * MSAT_PER_SAT))
        if cid in graph.channels:
            raise DuplicateChannelError(f"{where}: duplicate channel id")
        graph.add_channel(Channel(cid, node1, node2, capacity, policy1, policy2, public, balance))
    return graph


def load_snapshot(path, latency_table: LatencyTable | None = None) -> NetworkGraph:
    """Load a snapshot JSON file into a :class:`NetworkGraph`."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{path}: invalid JSON ({exc})") from None
    return graph_from_dict(data, latency_table)


def dump_snapshot(graph: NetworkGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=1) + "\n", encoding="utf-8")


# -- balances ----------------------------------------------------------------

_SKEWED_RE = re.compile(r"^skewed\(\s*([0-9.]+)\s*\)$")


def parse_balance_mode(mode) -> tuple[str, float | None]:
    """Accept ``"uniform"``, ``"one-sided"``, ``"skewed(0.7)"`` or ``("skewed", 0.7)``."""
    if isinstance(mode, (tuple, list)) and len(mode) == 2 and mode[0] == "skewed":
        return "skewed", check_probability(mode[1], "skewed threshold")
    if isinstance(mode, str):
        if mode in ("uniform", "one-sided"):
            return mode, None
        m = _SKEWED_RE.match(mode)
        if m:
            return "skewed", check_probability(float(m.group(1)), "skewed threshold")
    raise ConfigError(f"unknown balance mode {mode!r}")


def assign_balances(graph: NetworkGraph, mode="uniform", seed=None, *,
                    overwrite: bool = False, skew_share: float = 0.65) -> NetworkGraph:
    """Return a copy of ``graph`` with every channel's balance split set.

    ``uniform`` draws node1's fraction on [0, 1]; ``one-sided`` gives the
    whole capacity to node1 (treated as the funder); ``skewed(p)`` makes a
    ``skew_share`` fraction of channels lopsided, with one randomly chosen
    side holding at least ``p`` of the capacity.  Channels that already carry
    a balance are left alone unless ``overwrite`` is set.
    """
    kind, threshold = parse_balance_mode(mode)
    check_probability(skew_share, "skew_share")
    rng = check_rng(seed)
    out = graph.copy()
    for ch in out.sorted_channels():
        # one draw triple per channel keeps streams aligned across modes
        u1, u2, u3 = rng.random(3)
        if ch.balance1_msat is not None and not overwrite:
            continue
        if kind == "one-sided":
            frac = 1.0
        elif kind == "uniform":
            frac = u1
        else:
            if u2 < skew_share:
                heavy = threshold + (1.0 - threshold) * u1
            else:
                heavy = (1.0 - threshold) + (2.0 * threshold - 1.0) * u1 if threshold > 0.5 else u1
            frac = heavy if u3 < 0.5 else 1.0 - heavy
        ch.balance1_msat = min(ch.capacity_msat, max(0, int(frac * ch.capacity_msat)))
    return out


# -- attributes --------------------------------------------------------------

def _client_weights(client_distribution) -> np.ndarray:
    if isinstance(client_distribution, Mapping):
        unknown = set(client_distribution) - set(CLIENTS)
        if unknown:
            raise ConfigError(f"unknown clients in distribution: {sorted(unknown)}")
        counts = [client_distribution.get(c, 0) for c in CLIENTS]
    else:
        counts = list(client_distribution)
        if len(counts) != len(CLIENTS):
            raise ConfigError(f"client distribution needs {len(CLIENTS)} counts")
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0 or (counts < 0).any() or counts.sum() <= 0:
        raise ConfigError("client distribution must be non-negative with a positive entry")
    return counts / counts.sum()


def assign_attributes(graph: NetworkGraph, client_distribution=(292, 54, 24),
                      latency_table=None, seed=None) -> NetworkGraph:
    """Return a copy with client software and network location on every node.

    Declared clients and regions are kept.  Missing clients are sampled in
    proportion to ``client_distribution``; IP nodes without a region get one
    drawn uniformly from the latency table; onion-only nodes are located at
    ``"onion"``.
    """
    weights = _client_weights(client_distribution)
    if latency_table is None:
        table = graph.latency_table
    elif isinstance(latency_table, LatencyTable):
        table = latency_table
    else:
        table = LatencyTable.from_csv(latency_table)
    regions = table.regions or ("default",)
    rng = check_rng(seed)
    out = graph.copy()
    out.latency_table = table
    for nid in out.node_ids():
        attrs = out.nodes[nid]
        u_client, u_region = rng.random(2)
        if attrs.client is None:
            idx = int(np.searchsorted(np.cumsum(weights), u_client, side="right"))
            attrs.client = CLIENTS[min(idx, len(CLIENTS) - 1)]
        if attrs.address_class is None:
            attrs.address_class = address_class_of(attrs.addresses)
        if attrs.address_class == ONION:
            attrs.location = ONION
        elif attrs.location is None:
            attrs.location = regions[min(int(u_region * len(regions)), len(regions) - 1)]
    return out
