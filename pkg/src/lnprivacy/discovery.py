"""Off-path payment discovery from consecutive balance snapshots.

Differencing two snapshots leaves, per channel, the net amount that moved
and in which direction.  Hops of one payment differ by exactly the fee the
intermediate node charges, so adjacent edges whose amounts differ by a
public fee are stitched into one path; the path's ends are the inferred
sender and recipient.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from ._validation import check_probability
from .exceptions import ConfigError
from .graph import MSAT_PER_SAT, NetworkGraph
from .pathfind import hop_fee
from .probe import COVERAGES, Snapshot, probeable, top_degree_nodes

DEFAULT_TAUS = tuple(2 ** j for j in range(9))


@dataclass(frozen=True)
class DiffEdge:
    cid: str
    src: str
    dst: str
    amount: int  # sat that moved from src to dst


@dataclass
class DiffGraph:
    """Signed per-direction deltas (sat) of channels known in both snapshots."""

    edges: dict[tuple[str, int], int] = field(default_factory=dict)
    gaps: set[str] = field(default_factory=set)

    def moves(self, graph: NetworkGraph) -> list[DiffEdge]:
        """One edge per changed channel, pointing from the side that paid."""
        out = []
        for (cid, d), delta in self.edges.items():
            if d != 0:
                continue
            ch = graph.channels[cid]
            if delta < 0:
                out.append(DiffEdge(cid, ch.node1, ch.node2, -delta))
            else:
                out.append(DiffEdge(cid, ch.node2, ch.node1, delta))
        return out


@dataclass(frozen=True)
class InferredPayment:
    sender: str
    recipient: str
    amount: int
    path: tuple[str, ...]
    cids: tuple[str, ...] = ()
    amounts: tuple[int, ...] = ()


def diff_snapshots(s1: Snapshot, s2: Snapshot) -> DiffGraph:
    if not s1.time < s2.time:
        raise ValueError("first snapshot must be older than the second")
    diff = DiffGraph()
    for key in set(s1.balances) | set(s2.balances):
        a, b = s1.balances.get(key), s2.balances.get(key)
        if a is None or b is None:
            diff.gaps.add(key[0])
        elif a != b:
            diff.edges[key] = b - a
    return diff


def _fee_window(graph: NetworkGraph, src: str, cid: str, amount_sat: int, slack: int):
    """(lo, hi, exact) bounds in sat for the fee ``src`` charges on ``amount_sat``."""
    fee = hop_fee(graph.channels[cid].policy_from(src), amount_sat * MSAT_PER_SAT) / MSAT_PER_SAT
    return math.floor(fee) - slack, math.ceil(fee) + slack, fee


def decompose_payments(diff, graph: NetworkGraph, *, slack_sat: int = 1,
                       threshold_sat: int = 2) -> list[InferredPayment]:
    """Greedy minimal path decomposition of a difference graph.

    Edges are taken largest first (then by cid) and extended at both ends
    with the adjacent edge whose amount differs by the closest match to the
    public fee, within ``slack_sat`` of rounding.  Pairs of results whose
    amounts are within ``threshold_sat`` are dropped as ambiguous.
    """
    moves = diff.moves(graph) if isinstance(diff, DiffGraph) else list(diff)
    remaining = {m.cid: m for m in moves}
    out_of: dict[str, list[DiffEdge]] = {}
    into: dict[str, list[DiffEdge]] = {}
    for m in moves:
        out_of.setdefault(m.src, []).append(m)
        into.setdefault(m.dst, []).append(m)
    payments = []
    for seed in sorted(moves, key=lambda m: (-m.amount, m.cid)):
        if seed.cid not in remaining:
            continue
        del remaining[seed.cid]
        path = [seed]
        on_path = {seed.src, seed.dst}
        while True:  # toward the recipient
            last = path[-1]
            best = None
            for nxt in out_of.get(last.dst, ()):
                if nxt.cid not in remaining or nxt.dst in on_path:
                    continue
                lo, hi, fee = _fee_window(graph, nxt.src, nxt.cid, nxt.amount, slack_sat)
                gap = last.amount - nxt.amount
                if lo <= gap <= hi:
                    key = (abs(gap - fee), nxt.cid)
                    if best is None or key < best[0]:
                        best = (key, nxt)
            if best is None:
                break
            nxt = best[1]
            del remaining[nxt.cid]
            path.append(nxt)
            on_path.add(nxt.dst)
        while True:  # toward the sender
            first = path[0]
            lo, hi, fee = _fee_window(graph, first.src, first.cid, first.amount, slack_sat)
            best = None
            for prev in into.get(first.src, ()):
                if prev.cid not in remaining or prev.src in on_path:
                    continue
                gap = prev.amount - first.amount
                if lo <= gap <= hi:
                    key = (abs(gap - fee), prev.cid)
                    if best is None or key < best[0]:
                        best = (key, prev)
            if best is None:
                break
            prev = best[1]
            del remaining[prev.cid]
            path.insert(0, prev)
            on_path.add(prev.src)
        payments.append(InferredPayment(
            path[0].src, path[-1].dst, path[-1].amount,
            (path[0].src,) + tuple(m.dst for m in path), tuple(m.cid for m in path),
            tuple(m.amount for m in path)))
    return filter_ambiguous(payments, threshold_sat)


def filter_ambiguous(payments, threshold_sat: int = 2) -> list[InferredPayment]:
    """Drop every payment whose amount is within ``threshold_sat`` of another's."""
    order = sorted(range(len(payments)), key=lambda i: payments[i].amount)
    drop = set()
    for x, y in zip(order, order[1:]):
        if payments[y].amount - payments[x].amount <= threshold_sat:
            drop.update((x, y))
    return [p for i, p in enumerate(payments) if i not in drop]


def match_payments(inferred, actual, tolerance_sat: float = 1.0) -> int:
    """Size of a one-to-one matching on (sender, recipient, amount within tolerance)."""
    pairs = []
    by_ends: dict[tuple, list] = {}
    for j, ev in enumerate(actual):
        by_ends.setdefault((ev.sender, ev.recipient), []).append(j)
    for i, p in enumerate(inferred):
        for j in by_ends.get((p.sender, p.recipient), ()):
            err = abs(p.amount - actual[j].amount / MSAT_PER_SAT)
            if err <= tolerance_sat:
                pairs.append((err, i, j))
    used_i, used_j = set(), set()
    for _, i, j in sorted(pairs):
        if i not in used_i and j not in used_j:
            used_i.add(i)
            used_j.add(j)
    return len(used_i)


def evaluate(inferred, ground_truth) -> tuple[float | None, float]:
    """(precision, recall); precision is ``None`` with nothing detected, recall 1 with nothing to find."""
    actual = list(ground_truth)
    correct = match_payments(inferred, actual)
    precision = correct / len(inferred) if inferred else None
    recall = correct / len(actual) if actual else 1.0
    return precision, recall


@dataclass
class DiscoveryResult:
    tau_s: float
    detected: int
    correct: int
    actual: int
    inferred: list = field(default_factory=list)
    detected_raw: int = 0
    correct_raw: int = 0

    @property
    def precision_raw(self) -> float | None:
        """Precision before gap-fragment suppression."""
        return self.correct_raw / self.detected_raw if self.detected_raw else None

    @property
    def precision(self) -> float | None:
        return self.correct / self.detected if self.detected else None

    @property
    def recall(self) -> float:
        return self.correct / self.actual if self.actual else 1.0


class _FailureDraws:
    """Probe-failure uniforms of the snapshot taken at ``t_ms``.

    Keyed by (seed, time) so that snapshots at the same instant agree across
    interval lengths, and identical to :func:`snapshot_network` with
    ``seed=[seed, t_ms]``.
    """

    def __init__(self, seed: int, n_channels: int):
        self.seed = int(seed)
        self.n = n_channels
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, t_ms: int) -> np.ndarray:
        draws = self._cache.get(t_ms)
        if draws is None:
            if len(self._cache) > 64:
                self._cache.clear()
            draws = np.random.default_rng([self.seed, t_ms]).random(self.n)
            self._cache[t_ms] = draws
        return draws


class _BalanceHistory:
    """node1-side balance (msat) of every channel as a step function of time."""

    def __init__(self, log):
        self.initial = dict(log.initial_balances)
        steps: dict[str, list] = {}
        for ev in sorted(log.successes(), key=lambda e: (e.end_time, e.id)):
            for hop, amt in zip(ev.path.hops, ev.path.per_hop_amount):
                steps.setdefault(hop.cid, []).append((ev.end_time, hop.src, amt))
        self.times: dict[str, list] = {}
        self.values: dict[str, list] = {}
        self._srcs = steps
        self._node1: dict[str, str] = {}

    def bind(self, graph: NetworkGraph) -> "_BalanceHistory":
        for cid, items in self._srcs.items():
            node1 = graph.channels[cid].node1
            bal = self.initial[cid]
            times, values = [], []
            for t, src, amt in items:
                bal += -amt if src == node1 else amt
                times.append(t)
                values.append(bal)
            self.times[cid], self.values[cid] = times, values
        return self

    def at(self, cid: str, t_ms: float) -> int:
        times = self.times.get(cid)
        if not times:
            return self.initial[cid]
        i = bisect.bisect_right(times, t_ms)
        return self.values[cid][i - 1] if i else self.initial[cid]


def run_discovery(graph: NetworkGraph, log, tau_s: float, *, attacker_connected=None,
                  coverage: str = "generic", failure_probability: float = 0.05, seed: int = 0,
                  slack_sat: int = 1, threshold_sat: int = 2, gap_filter: bool = True,
                  bridge_steps: int = 16, keep_inferred: bool = False) -> DiscoveryResult:
    """Snapshot every ``tau_s`` seconds over the log's horizon and score discovery.

    Only intervals in which some payment completed are visited; elsewhere
    both snapshots agree and nothing can be inferred.

    With ``gap_filter``, a payment is suppressed when one of its end nodes
    has an unknown channel whose balance, bridged between the nearest
    snapshots (up to ``bridge_steps`` intervals away) where it is known,
    moved by an amount that continues the path with a consistent fee.
    Such payments are most likely fragments of a longer one.
    """
    if tau_s <= 0:
        raise ConfigError("tau must be positive")
    if coverage not in COVERAGES:
        raise ConfigError(f"coverage must be one of {COVERAGES}")
    check_probability(failure_probability, "failure_probability")
    connected = set(graph.nodes) if attacker_connected is None else set(attacker_connected)
    channels = graph.sorted_channels()
    index = {ch.cid: i for i, ch in enumerate(channels)}
    visible = np.array([probeable(ch, connected, coverage) for ch in channels], dtype=bool)
    draws = _FailureDraws(seed, len(channels))
    tau_ms = tau_s * 1000.0
    history = _BalanceHistory(log).bind(graph)

    def t_of(k: int) -> int:
        return int(round(k * tau_ms))

    def known(cid: str, k: int) -> bool:
        i = index[cid]
        return bool(visible[i]) and draws(t_of(k))[i] >= failure_probability

    def bridged_flow(cid: str, node: str, k: int) -> int | None:
        """Sat that moved toward ``node`` on ``cid`` around interval ``k``."""
        j = next((j for j in range(k, max(k - bridge_steps, -1), -1) if known(cid, j)), None)
        m = next((m for m in range(k + 1, k + 1 + bridge_steps) if known(cid, m)), None)
        if j is None or m is None:
            return None
        delta = history.at(cid, t_of(m)) // MSAT_PER_SAT - history.at(cid, t_of(j)) // MSAT_PER_SAT
        return -delta if graph.channels[cid].node2 == node else delta

    def is_fragment(p: InferredPayment, k: int) -> bool:
        first, last = p.amounts[0], p.amounts[-1]
        lo, hi, _ = _fee_window(graph, p.sender, p.cids[0], first, slack_sat)
        for ch in graph.channels_of(p.sender):
            if ch.cid in p.cids or not visible[index[ch.cid]]:
                continue
            if known(ch.cid, k) and known(ch.cid, k + 1):
                continue
            flow = bridged_flow(ch.cid, p.sender, k)
            if flow is not None and flow > 0 and lo <= flow - first <= hi:
                return True
        for ch in graph.channels_of(p.recipient):
            if ch.cid in p.cids or not visible[index[ch.cid]]:
                continue
            if known(ch.cid, k) and known(ch.cid, k + 1):
                continue
            flow = bridged_flow(ch.cid, p.recipient, k)
            if flow is None or flow >= 0:
                continue
            lo, hi, _ = _fee_window(graph, p.recipient, ch.cid, -flow, slack_sat)
            if lo <= last + flow <= hi:
                return True
        return False

    balance1 = dict(log.initial_balances)
    events = sorted(log.successes(), key=lambda e: (e.end_time, e.id))
    groups: dict[int, list] = {}
    for ev in events:
        k = max(int(math.ceil(ev.end_time / tau_ms)) - 1, 0)
        groups.setdefault(k, []).append(ev)

    result = DiscoveryResult(tau_s, 0, 0, len(events))
    for k in sorted(groups):
        batch = groups[k]
        touched = sorted({h.cid for ev in batch for h in ev.path.hops})
        before = {cid: balance1[cid] // MSAT_PER_SAT for cid in touched}
        for ev in batch:
            for hop, amt in zip(ev.path.hops, ev.path.per_hop_amount):
                ch = graph.channels[hop.cid]
                balance1[hop.cid] += -amt if hop.src == ch.node1 else amt
        diff = DiffGraph()
        for cid in touched:
            if not (known(cid, k) and known(cid, k + 1)):
                diff.gaps.add(cid)
                continue
            delta = balance1[cid] // MSAT_PER_SAT - before[cid]
            if delta:
                diff.edges[(cid, 0)] = delta
                diff.edges[(cid, 1)] = -delta
        inferred = decompose_payments(diff, graph, slack_sat=slack_sat, threshold_sat=threshold_sat)
        result.detected_raw += len(inferred)
        result.correct_raw += match_payments(inferred, batch)
        if gap_filter:
            inferred = [p for p in inferred if not is_fragment(p, k)]
        result.detected += len(inferred)
        result.correct += match_payments(inferred, batch)
        if keep_inferred:
            result.inferred.extend((t_of(k), p) for p in inferred)
    return result


def mean_ci(values, confidence: float = 0.95) -> tuple[float, float, float]:
    """Mean and two-sided Student-t confidence interval."""
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return math.nan, math.nan, math.nan
    mean = float(arr.mean())
    if arr.size < 2 or float(arr.std(ddof=1)) == 0.0:
        return mean, mean, mean
    half = float(stats.t.ppf(0.5 + confidence / 2, arr.size - 1) * stats.sem(arr))
    return mean, mean - half, mean + half


def tau_sweep(graph: NetworkGraph, logs, taus=DEFAULT_TAUS, seeds=None, **kwargs) -> list[dict]:
    """Precision and recall per tau, averaged over the logs.

    ``seeds`` gives one probe-failure seed per log (default: the log's index).
    """
    logs = list(logs)
    seeds = list(range(len(logs))) if seeds is None else list(seeds)
    if len(seeds) != len(logs):
        raise ConfigError("need one seed per log")
    rows = []
    for tau in taus:
        per_seed = [run_discovery(graph, log, tau, seed=s, **kwargs) for s, log in zip(seeds, logs)]
        p, p_lo, p_hi = mean_ci([r.precision for r in per_seed])
        r, r_lo, r_hi = mean_ci([r.recall for r in per_seed])
        raw = mean_ci([r.precision_raw for r in per_seed])[0]
        rows.append({"tau_s": tau, "precision": p, "recall": r, "ci_low": r_lo, "ci_high": r_hi,
                     "precision_ci_low": p_lo, "precision_ci_high": p_hi, "precision_raw": raw,
                     "recall_runs": [r.recall for r in per_seed]})
    return rows


def recall_vs_budget(graph: NetworkGraph, logs, n_values, coverage: str = "oracle_aided", *,
                     tau_s: float = 30.0, seeds=None, **kwargs) -> list[dict]:
    """Recall when the attacker is connected to the top-``n`` nodes by degree."""
    n_values = list(n_values)
    if not n_values or any(n < 1 for n in n_values):
        raise ConfigError("n values must be positive")
    if any(b < a for a, b in zip(n_values, n_values[1:])):
        raise ConfigError("n values must be nondecreasing")
    logs = list(logs)
    seeds = list(range(len(logs))) if seeds is None else list(seeds)
    rows = []
    for n in n_values:
        n_eff = min(n, len(graph.nodes))
        targets = top_degree_nodes(graph, n_eff)
        recalls = [run_discovery(graph, log, tau_s, attacker_connected=targets, coverage=coverage,
                                 seed=s, **kwargs).recall for s, log in zip(seeds, logs)]
        r, lo, hi = mean_ci(recalls)
        rows.append({"n": n_eff, "coverage": coverage, "recall": r, "ci_low": lo, "ci_high": hi})
    return rows


class PaymentDiscovery(BaseEstimator):
    """Snapshot-differencing attack in estimator form.

    ``fit(log, graph=...)`` runs the attack over a simulated event log and
    keeps the inferred payments; ``score`` reports recall against the log.
    """

    def __init__(self, tau_s: float = 32.0, coverage: str = "generic", attacker_connected=None,
                 failure_probability: float = 0.05, slack_sat: int = 1, threshold_sat: int = 2,
                 gap_filter: bool = True, seed: int = 0):
        self.tau_s = tau_s
        self.coverage = coverage
        self.attacker_connected = attacker_connected
        self.failure_probability = failure_probability
        self.slack_sat = slack_sat
        self.threshold_sat = threshold_sat
        self.gap_filter = gap_filter
        self.seed = seed

    def _run(self, log, graph):
        return run_discovery(graph, log, self.tau_s, attacker_connected=self.attacker_connected,
                             coverage=self.coverage, failure_probability=self.failure_probability,
                             seed=self.seed, slack_sat=self.slack_sat,
                             threshold_sat=self.threshold_sat, gap_filter=self.gap_filter,
                             keep_inferred=True)

    def fit(self, X, y=None, *, graph: NetworkGraph):
        self.graph_ = graph
        self.result_ = self._run(X, graph)
        self.inferred_ = [p for _, p in self.result_.inferred]
        self.precision_ = self.result_.precision
        self.recall_ = self.result_.recall
        return self

    def predict(self, X) -> list[InferredPayment]:
        if not hasattr(self, "graph_"):
            raise ConfigError("call fit before predict")
        return [p for _, p in self._run(X, self.graph_).inferred]

    def score(self, X, y=None) -> float:
        if not hasattr(self, "graph_"):
            raise ConfigError("call fit before score")
        return self._run(X, self.graph_).recall


INFERRED_FIELDS = ["interval_start", "sender", "recipient", "amount_sat", "path"]
EVAL_FIELDS = ["tau_s", "precision", "recall", "ci_low", "ci_high"]


def write_inferred(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(INFERRED_FIELDS)
        for t, p in rows:
            writer.writerow([t, p.sender, p.recipient, p.amount, " ".join(p.path)])
