"""Client-specific route selection.

Routes are searched backwards from the recipient, the way real clients do,
because the amount entering a hop depends on the fees of every hop after it.
Since edge weights depend on that amount, a single label per node is not
enough for exactness: each node keeps the Pareto set of labels that are not
dominated in (amount still to be delivered, hop count).  Labels are popped in
``(weight, hops, cid sequence)`` order, so the first label reaching the
sender is the optimum under the same total order a brute-force enumeration
uses.  Weights are exact rationals, represented as integers over a
per-client common denominator.
"""

from __future__ import annotations

import heapq
import itertools
import math
import weakref
from collections import OrderedDict
from collections.abc import Mapping
from dataclasses import dataclass, fields
from fractions import Fraction

import numpy as np

from .exceptions import ConfigError
from .graph import CLIENTS, Channel, FeePolicy, Hop, NetworkGraph

try:
    from . import _kernels
except ImportError:  # pragma: no cover - numba missing
    _kernels = None

PPM = 1_000_000


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class WeightParams:
    """Constants of the three clients' edge-weight functions.

    lnd:          fee + amt * cltv * lnd_risk_factor
    c-lightning:  fee + amt * cltv * cl_risk_factor / (cl_blocks_per_year * 100) + cl_bias_msat
    eclair:       fee * (1 + eclair_cltv_weight * cltv
                          + eclair_capacity_weight * (1 - capacity / max_capacity))
    """

    lnd_risk_factor: Fraction = Fraction(15, 10**9)
    cl_risk_factor: Fraction = Fraction(10)
    cl_blocks_per_year: int = 52596
    cl_bias_msat: Fraction = Fraction(1)
    eclair_cltv_weight: Fraction = Fraction(15, 100)
    eclair_capacity_weight: Fraction = Fraction(1, 2)
    max_path_nodes: int = 20

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("cl_blocks_per_year", "max_path_nodes"):
                if int(value) != value or value < (2 if f.name == "max_path_nodes" else 1):
                    raise ConfigError(f"{f.name} must be a positive integer")
                object.__setattr__(self, f.name, int(value))
            else:
                value = _frac(value)
                if value < 0:
                    raise ConfigError(f"{f.name} must be non-negative")
                object.__setattr__(self, f.name, value)

    @classmethod
    def from_mapping(cls, mapping: Mapping | None) -> "WeightParams":
        if not mapping:
            return cls()
        names = {f.name for f in fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise ConfigError(f"unknown weight parameters: {sorted(unknown)}")
        return cls(**mapping)

    @classmethod
    def zero_risk(cls, **overrides) -> "WeightParams":
        """All risk terms switched off: every client weighs a hop by its fee."""
        base = dict(lnd_risk_factor=0, cl_risk_factor=0, cl_bias_msat=0,
                    eclair_cltv_weight=0, eclair_capacity_weight=0)
        base.update(overrides)
        return cls(**base)


DEFAULT_PARAMS = WeightParams()


def hop_fee(policy: FeePolicy, amt: int) -> int:
    """Fee in msat a node charges to forward ``amt`` msat under ``policy``."""
    if amt < 0:
        raise ValueError("amount must be non-negative")
    return policy.base_fee_msat + amt * policy.fee_rate_ppm // PPM


def _check_client(client: str) -> str:
    if client not in CLIENTS:
        raise ConfigError(f"unknown client {client!r}; expected one of {CLIENTS}")
    return client


def _weight_coefficients(client: str, channel: Channel, policy: FeePolicy,
                         params: WeightParams, max_capacity_sat: int):
    """(fee multiplier, amount coefficient, constant) with weight = f*m + a*c + k."""
    if client == "lnd":
        return Fraction(1), policy.cltv_delta * params.lnd_risk_factor, Fraction(0)
    if client == "c-lightning":
        coef = policy.cltv_delta * params.cl_risk_factor / (params.cl_blocks_per_year * 100)
        return Fraction(1), coef, params.cl_bias_msat
    ratio = Fraction(channel.capacity_sat, max(max_capacity_sat, channel.capacity_sat))
    mult = (1 + params.eclair_cltv_weight * policy.cltv_delta
            + params.eclair_capacity_weight * (1 - ratio))
    return mult, Fraction(0), Fraction(0)


def edge_weight(client: str, channel: Channel, src: str, amt: int,
                params: WeightParams | None = None, max_capacity_sat: int | None = None) -> Fraction:
    """Weight of forwarding ``amt`` msat over ``channel`` starting at ``src``.

    ``max_capacity_sat`` is the largest capacity in the graph (eclair only);
    it defaults to the channel's own capacity.
    """
    _check_client(client)
    if amt <= 0:
        raise ValueError("amount must be positive")
    params = params or DEFAULT_PARAMS
    policy = channel.policy_from(src)
    mult, coef, const = _weight_coefficients(
        client, channel, policy, params, max_capacity_sat or channel.capacity_sat)
    return hop_fee(policy, amt) * mult + amt * coef + const


@dataclass(frozen=True)
class Path:
    """A route with the amount entering each hop (msat)."""

    sender: str
    recipient: str
    hops: tuple[Hop, ...]
    per_hop_amount: tuple[int, ...]
    weight: Fraction = Fraction(0)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.sender,) + tuple(h.dst for h in self.hops)

    @property
    def length(self) -> int:
        """Number of nodes including both endpoints."""
        return len(self.hops) + 1

    @property
    def amount(self) -> int:
        return self.per_hop_amount[-1]

    @property
    def outlay(self) -> int:
        return self.per_hop_amount[0]

    @property
    def fees(self) -> int:
        return self.outlay - self.amount

    @property
    def key(self):
        return self.weight, len(self.hops), tuple(h.cid for h in self.hops)


def path_amounts(graph: NetworkGraph, hops, amt: int) -> tuple[int, ...]:
    """Per-hop amounts computed backward from the recipient."""
    amounts = [amt]
    for hop in reversed(hops[1:]):
        policy = graph.channels[hop.cid].policy_from(hop.src)
        amounts.append(amounts[-1] + hop_fee(policy, amounts[-1]))
    return tuple(reversed(amounts))


class _Prepared:
    """Integer-scaled incoming adjacency for one client."""

    def __init__(self, graph: NetworkGraph, client: str, params: WeightParams):
        self.client = client
        max_cap = graph.max_capacity_sat
        cids = sorted(graph.channels)
        rank = {cid: i for i, cid in enumerate(cids)}
        self.hops: list[Hop] = []
        raw = []
        for cid in cids:
            ch = graph.channels[cid]
            for src, dst, policy in ((ch.node1, ch.node2, ch.policy1), (ch.node2, ch.node1, ch.policy2)):
                coeffs = _weight_coefficients(client, ch, policy, params, max_cap)
                raw.append((len(self.hops), src, dst, ch, policy, coeffs))
                self.hops.append(Hop(cid, src, dst))
        denom = 1
        for *_, coeffs in raw:
            for c in coeffs:
                denom = denom * c.denominator // math.gcd(denom, c.denominator)
        self.denominator = denom
        self.incoming: dict[str, list[tuple]] = {nid: [] for nid in graph.nodes}
        for eid, src, dst, ch, policy, (mult, coef, const) in raw:
            self.incoming[dst].append((
                src, eid, ch.capacity_msat, policy.base_fee_msat, policy.fee_rate_ppm,
                int(mult * denom), int(coef * denom), int(const * denom), ch.public, rank[ch.cid],
            ))
        self.by_eid = {item[1]: item for items in self.incoming.values() for item in items}
        self.max_hops = params.max_path_nodes - 1
        self._arrays = None

    @property
    def int64_safe_cached(self) -> bool:
        if not hasattr(self, "_safe"):
            self._safe = self.int64_safe
        return self._safe

    @property
    def int64_safe(self) -> bool:
        """Whether every label weight and amount provably fits in int64."""
        items = list(self.by_eid.values())
        if not items:
            return True
        cap = max(i[2] for i in items)
        max_rate = max(i[4] for i in items)
        fee = max(i[3] for i in items) + cap * max_rate // PPM
        amount = cap + fee
        per_hop = (fee * max(i[5] for i in items) + amount * max(i[6] for i in items)
                   + max(i[7] for i in items))
        limit = 2 ** 62
        return per_hop * (self.max_hops + 1) < limit and amount * max(max_rate, 1) < limit

    def arrays(self):
        """CSR incoming adjacency plus per-eid lookup tables for the kernel."""
        if self._arrays is None:
            nodes = sorted(self.incoming)
            index = {nid: i for i, nid in enumerate(nodes)}
            indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
            rows = []
            for i, nid in enumerate(nodes):
                rows.extend(self.incoming[nid])
                indptr[i + 1] = len(rows)
            cols = list(zip(*rows)) if rows else [()] * 10
            csr = [np.array([index[t] for t in cols[0]], dtype=np.int64)]
            csr += [np.array(c, dtype=np.int64) for c in cols[1:]]
            n_e = len(self.hops)
            by_eid = [np.zeros(n_e, dtype=np.int64) for _ in range(6)]
            for e, item in self.by_eid.items():
                for col, j in zip(by_eid, (2, 3, 4, 5, 6, 7)):
                    col[e] = item[j]
            self._arrays = (nodes, index, indptr, csr, by_eid)
        return self._arrays

    def fraction(self, w: int) -> Fraction:
        return Fraction(w, self.denominator)


class Router:
    """Route finder bound to one graph's capacities and fee policies.

    Balances are never consulted, so a router stays valid while payments
    move funds around.  ``cache_size`` bounds the number of cached
    all-senders searches used by :meth:`route`.
    """

    def __init__(self, graph: NetworkGraph, params: WeightParams | None = None,
                 cache_size: int = 128, backend: str = "auto"):
        if backend not in ("auto", "python"):
            raise ConfigError("backend must be 'auto' or 'python'")
        self.backend = backend
        self.graph = graph
        self.params = params or DEFAULT_PARAMS
        self._prepared: dict[str, _Prepared] = {}
        self._cache: OrderedDict = OrderedDict()
        self.cache_size = cache_size
        self._n_channels = len(graph.channels)

    def prepared(self, client: str) -> _Prepared:
        _check_client(client)
        prep = self._prepared.get(client)
        if prep is None:
            prep = self._prepared[client] = _Prepared(self.graph, client, self.params)
        return prep

    # -- searches --------------------------------------------------------

    def _search_py(self, prep: _Prepared, sender: str, recipient: str, amt: int, *,
                root: tuple[int, ...] = (), target: str | None = None,
                banned_nodes=frozenset(), banned_eids=frozenset()):
        """Best ``(key, eids)`` from ``target`` (default ``sender``) to the recipient,
        prefixed by the fixed ``root`` hops (eids, sender first)."""
        target = sender if target is None else target
        max_hops = prep.max_hops - len(root)
        if max_hops < 1:
            return None
        incoming = prep.incoming
        counter = itertools.count()
        heap = [(0, 0, (), 0, recipient, amt, (recipient,), ())]
        settled: dict[str, list] = {}
        best = None
        root_rev = tuple(reversed(root))
        root_seq = tuple(prep.by_eid[e][9] for e in root)
        while heap:
            w, h, seq, _, u, a, pnodes, eids = heapq.heappop(heap)
            if best is not None and w > best[0][0]:
                break
            marks = settled.get(u)
            if marks is None:
                settled[u] = [(a, h)]
            elif any(a0 <= a and h0 <= h for a0, h0 in marks):
                continue
            else:
                marks.append((a, h))
            if u == target:
                key, full = self._close_root(prep, w, h, seq, a, eids, root_rev, root_seq)
                if key is not None and (best is None or key < best[0]):
                    best = (key, full)
                if not root:
                    break
                continue
            if h >= max_hops:
                continue
            for t, e, cap, base, rate, mult, coef, const, public, rank in incoming[u]:
                if cap < a or t in pnodes or t in banned_nodes:
                    continue
                if not public and recipient != u and recipient != t and sender != u and sender != t:
                    continue
                if t == target and e in banned_eids:
                    continue
                fee = base + a * rate // PPM
                na = a + fee
                nh = h + 1
                marks_t = settled.get(t)
                if marks_t is not None and any(a0 <= na and h0 <= nh for a0, h0 in marks_t):
                    continue
                heapq.heappush(heap, (w + fee * mult + a * coef + const, nh, (rank,) + seq,
                                      next(counter), t, na, (t,) + pnodes, (e,) + eids))
        return best

    def _close_root(self, prep, w, h, seq, a, eids, root_rev, root_seq):
        if not root_rev:
            return (w, h, seq), eids
        for e in root_rev:
            _, _, cap, base, rate, mult, coef, const, _, _ = prep.by_eid[e]
            if cap < a:
                return None, None
            fee = base + a * rate // PPM
            w = w + fee * mult + a * coef + const
            a = a + fee
        n_root = len(root_rev)
        return (w, h + n_root, root_seq + seq), tuple(reversed(root_rev)) + eids

    def _use_kernel(self, prep: _Prepared) -> bool:
        return self.backend == "auto" and _kernels is not None and prep.int64_safe_cached

    def _kernel_call(self, prep, recipient, amt, target, sender, root, banned_nodes,
                     banned_eids, full):
        nodes, index, indptr, csr, by_eid = prep.arrays()
        banned_node = np.zeros(len(nodes), dtype=np.bool_)
        for nid in banned_nodes:
            banned_node[index[nid]] = True
        banned_eid = np.zeros(len(prep.hops), dtype=np.bool_)
        for e in banned_eids:
            banned_eid[e] = True
        root_rev = np.array(list(reversed(root)), dtype=np.int64)
        return _kernels.label_search(
            indptr, *csr, *by_eid, index[recipient], amt,
            index[target] if target is not None else -1,
            index[sender] if sender is not None else -1,
            prep.max_hops - len(root), banned_node, banned_eid, root_rev, full)

    @staticmethod
    def _unwind(L, idx):
        eids, seq = [], []
        while L[idx, 5] >= 0:
            eids.append(int(L[idx, 5]))
            seq.append(int(L[idx, 6]))
            idx = L[idx, 4]
        return tuple(eids), tuple(seq)

    def _search(self, prep: _Prepared, sender: str, recipient: str, amt: int, *,
                root: tuple[int, ...] = (), target: str | None = None,
                banned_nodes=frozenset(), banned_eids=frozenset()):
        if not self._use_kernel(prep):
            return self._search_py(prep, sender, recipient, amt, root=root, target=target,
                                   banned_nodes=banned_nodes, banned_eids=banned_eids)
        target = sender if target is None else target
        if prep.max_hops - len(root) < 1:
            return None
        L, _, idx, total = self._kernel_call(prep, recipient, amt, target, sender, root,
                                             banned_nodes, banned_eids, False)
        if idx < 0:
            return None
        eids, seq = self._unwind(L, idx)
        root_seq = tuple(prep.by_eid[e][9] for e in root)
        return (int(total), len(root) + len(eids), root_seq + seq), tuple(root) + eids

    def search_all(self, recipient: str, amt: int, client: str) -> dict[str, tuple]:
        """Optimal ``(key, eids)`` from every node to ``recipient`` in one sweep.

        Private channels that do not touch the recipient may only serve as a
        sender's first hop; such labels are terminal.
        """
        prep = self.prepared(client)
        if not self._use_kernel(prep):
            return self._search_all_py(prep, recipient, amt)
        L, best, _, _ = self._kernel_call(prep, recipient, amt, None, None, (), (), (), True)
        nodes = prep.arrays()[0]
        out = {}
        for i in np.flatnonzero(best >= 0):
            idx = best[i]
            eids, seq = self._unwind(L, idx)
            out[nodes[i]] = ((int(L[idx, 0]), int(L[idx, 1]), seq), eids)
        return out

    def _search_all_py(self, prep: _Prepared, recipient: str, amt: int) -> dict[str, tuple]:
        incoming = prep.incoming
        max_hops = prep.max_hops
        counter = itertools.count()
        heap = [(0, 0, (), 0, recipient, amt, (recipient,), (), False)]
        settled: dict[str, list] = {}
        best: dict[str, tuple] = {}
        while heap:
            w, h, seq, _, u, a, pnodes, eids, terminal = heapq.heappop(heap)
            if terminal:
                if u not in best:
                    best[u] = ((w, h, seq), eids)
                continue
            marks = settled.get(u)
            if marks is None:
                settled[u] = [(a, h)]
            elif any(a0 <= a and h0 <= h for a0, h0 in marks):
                continue
            else:
                marks.append((a, h))
            if u not in best and u != recipient:
                best[u] = ((w, h, seq), eids)
            if h >= max_hops:
                continue
            for t, e, cap, base, rate, mult, coef, const, public, rank in incoming[u]:
                if cap < a or t in pnodes:
                    continue
                is_terminal = not public and recipient != u and recipient != t
                if is_terminal and t in best:
                    continue
                fee = base + a * rate // PPM
                na = a + fee
                nh = h + 1
                if not is_terminal:
                    marks_t = settled.get(t)
                    if marks_t is not None and any(a0 <= na and h0 <= nh for a0, h0 in marks_t):
                        continue
                heapq.heappush(heap, (w + fee * mult + a * coef + const, nh, (rank,) + seq,
                                      next(counter), t, na, (t,) + pnodes, (e,) + eids,
                                      is_terminal))
        return best

    # -- public API ------------------------------------------------------

    def _make_path(self, prep: _Prepared, sender: str, recipient: str, amt: int,
                   key, eids) -> Path:
        hops = tuple(prep.hops[e] for e in eids)
        return Path(sender, recipient, hops, path_amounts(self.graph, hops, amt),
                    prep.fraction(key[0]))

    def _check_query(self, sender, recipient, amt):
        if sender == recipient:
            raise ValueError("sender and recipient must differ")
        if amt <= 0:
            raise ValueError("amount must be positive")
        for node in (sender, recipient):
            if node not in self.graph.nodes:
                raise KeyError(f"unknown node {node}")

    def find_path(self, sender: str, recipient: str, amt: int, client: str) -> Path | None:
        """Cheapest admissible path, or ``None`` when no path exists."""
        self._check_query(sender, recipient, amt)
        prep = self.prepared(client)
        found = self._search(prep, sender, recipient, amt)
        if found is None:
            return None
        return self._make_path(prep, sender, recipient, amt, *found)

    def route(self, sender: str, recipient: str, amt: int, client: str) -> Path | None:
        """Same result as :meth:`find_path`, served from a per-recipient cache."""
        self._check_query(sender, recipient, amt)
        prep = self.prepared(client)
        key = (recipient, amt, client)
        table = self._cache.get(key)
        if table is None:
            table = self.search_all(recipient, amt, client)
            self._cache[key] = table
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(key)
        found = table.get(sender)
        if found is None:
            return None
        return self._make_path(prep, sender, recipient, amt, *found)

    def k_shortest_paths(self, sender: str, recipient: str, amt: int, k: int,
                         client: str) -> list[Path]:
        """Up to ``k`` distinct admissible paths in increasing key order (Yen)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        self._check_query(sender, recipient, amt)
        prep = self.prepared(client)
        first = self._search(prep, sender, recipient, amt)
        if first is None:
            return []
        accepted = [first]
        seen = {first[1]}
        candidates: list = []
        while len(accepted) < k:
            _, last = accepted[-1]
            last_nodes = [sender] + [prep.hops[e].dst for e in last]
            for i in range(len(last)):
                spur = last_nodes[i]
                root = last[:i]
                banned_eids = {eids[i] for _, eids in accepted
                               if len(eids) > i and eids[:i] == root}
                found = self._search(prep, sender, recipient, amt, root=root, target=spur,
                                     banned_nodes=frozenset(last_nodes[:i]),
                                     banned_eids=frozenset(banned_eids))
                if found is not None and found[1] not in seen:
                    seen.add(found[1])
                    heapq.heappush(candidates, found)
            if not candidates:
                break
            accepted.append(heapq.heappop(candidates))
        return [self._make_path(prep, sender, recipient, amt, key, eids)
                for key, eids in accepted]

    def _widest_adjacency(self):
        adj = getattr(self, "_wadj", None)
        if adj is None:
            adj = {nid: [] for nid in self.graph.nodes}
            for ch in self.graph.sorted_channels():
                for u, v in ((ch.node1, ch.node2), (ch.node2, ch.node1)):
                    adj[u].append((ch.cid, v, ch.capacity_sat, ch.public))
            self._wadj = adj
            self._has_private = not all(ch.public for ch in self.graph.channels.values())
            self._wtrees = OrderedDict()
        return adj

    def _widest_tree(self, sender: str, recipient: str | None, first_hop=None):
        """Predecessor hops of a bottleneck-maximizing Dijkstra from ``sender``.

        Labels are compared on (bottleneck desc, hops asc); both components
        only get worse along a path, so the search is exact.  ``first_hop``
        maps the sender's channel ids to their usable amount in msat.
        Without a ``recipient`` the whole tree is built.
        """
        adj = self._widest_adjacency()
        best = {sender: (-math.inf, 0)}
        prev: dict[str, Hop] = {}
        heap = [(-math.inf, 0, sender)]
        done = set()
        while heap:
            neg_bn, h, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u == recipient:
                break
            for cid, v, cap, public in adj[u]:
                if v in done:
                    continue
                if not public and u != sender and v != sender and u != recipient and v != recipient:
                    continue
                if u == sender and first_hop is not None:
                    cap = min(cap, first_hop[cid])
                label = (neg_bn if neg_bn > -cap else -cap, h + 1)
                old = best.get(v)
                if old is None or label < old:
                    best[v] = label
                    prev[v] = Hop(cid, u, v)
                    heapq.heappush(heap, (label[0], label[1], v))
        return prev

    def widest_path(self, sender: str, recipient: str, balances: NetworkGraph | None = None
                    ) -> tuple[Hop, ...]:
        """Admissible path maximizing the smallest usable amount (ties: fewer hops).

        Hops are limited by capacity; when ``balances`` (a graph holding the
        current balances) is given, the sender's own channels are limited by
        its outbound balance instead, since the sender knows those.
        """
        self._check_query(sender, recipient, 1)
        self._widest_adjacency()
        if balances is not None:
            first_hop = {ch.cid: min(ch.capacity_msat, balances.channels[ch.cid].balance_from(sender))
                         for ch in self.graph.channels_of(sender)}
            prev = self._widest_tree(sender, recipient, first_hop)
        elif self._has_private:
            prev = self._widest_tree(sender, recipient)
        else:
            prev = self._wtrees.get(sender)
            if prev is None:
                prev = self._wtrees[sender] = self._widest_tree(sender, None)
                if len(self._wtrees) > self.cache_size:
                    self._wtrees.popitem(last=False)
        if recipient not in prev:
            return ()
        hops = []
        node = recipient
        while node != sender:
            hops.append(prev[node])
            node = prev[node].src
        return tuple(reversed(hops))

    def max_routable_amount(self, sender: str, recipient: str,
                            balances: NetworkGraph | None = None) -> int:
        """Largest amount (msat) whose fee chain fits the widest path.

        Returns 0 when the endpoints are disconnected.  See :meth:`widest_path`
        for the role of ``balances``.
        """
        hops = self.widest_path(sender, recipient, balances)
        if not hops:
            return 0
        limits = [self.graph.channels[h.cid].capacity_msat for h in hops]
        if balances is not None:
            limits[0] = min(limits[0], balances.channels[hops[0].cid].balance_from(sender))

        def fits(amt):
            return all(a <= c for a, c in zip(path_amounts(self.graph, hops, amt), limits))

        lo, hi = 0, limits[-1]
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if fits(mid):
                lo = mid
            else:
                hi = mid - 1
        return lo

    def clear_cache(self) -> None:
        self._cache.clear()


_ROUTERS: "weakref.WeakKeyDictionary[NetworkGraph, dict]" = weakref.WeakKeyDictionary()


def get_router(graph: NetworkGraph, params: WeightParams | None = None) -> Router:
    """Shared router for ``graph`` (rebuilt if channels were added)."""
    params = params or DEFAULT_PARAMS
    per_graph = _ROUTERS.setdefault(graph, {})
    router = per_graph.get(params)
    if router is None or router._n_channels != len(graph.channels):
        router = per_graph[params] = Router(graph, params)
    return router


def find_path(graph: NetworkGraph, sender: str, recipient: str, amt: int, client: str,
              params: WeightParams | None = None) -> Path | None:
    return get_router(graph, params).find_path(sender, recipient, amt, client)


def k_shortest_paths(graph: NetworkGraph, sender: str, recipient: str, amt: int, k: int,
                     client: str, params: WeightParams | None = None) -> list[Path]:
    return get_router(graph, params).k_shortest_paths(sender, recipient, amt, k, client)
