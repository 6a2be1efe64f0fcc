"""Payment generation and execution.

Payments are drawn at uniform times over the horizon and executed one at a
time in timestamp order; a payment's balance updates are applied atomically,
so concurrent in-flight HTLCs are not modeled.
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_positive_int, check_rng
from .exceptions import ConfigError, EmptyLogError
from .graph import CLIENTS, MSAT_PER_SAT, NetworkGraph
from .pathfind import Path, Router, WeightParams, get_router

MS_PER_DAY = 86_400_000
DEGREE_BUCKETS = ((1, 150), (150, 300), (300, 500), (500, None))
_FIXED_RE = re.compile(r"^fixed\(\s*(\d+)\s*,\s*(\d+)\s*\)$")


def parse_values(values) -> tuple:
    """Normalize a value mode to ``("cheap",)``, ``("expensive",)`` or ``("fixed", mean, jitter)``.

    Fixed modes are in satoshi and accept ``"fixed(1000, 10)"``, a
    ``("fixed", 1000, 10)`` sequence or ``{"fixed": [1000, 10]}``.
    """
    if isinstance(values, str):
        if values in ("cheap", "expensive"):
            return (values,)
        m = _FIXED_RE.match(values.strip())
        if m:
            values = ("fixed", int(m.group(1)), int(m.group(2)))
    elif isinstance(values, dict) and set(values) == {"fixed"}:
        values = ("fixed", *values["fixed"])
    if isinstance(values, (tuple, list)) and len(values) == 3 and values[0] == "fixed":
        mean, jitter = values[1], values[2]
        if int(mean) != mean or int(jitter) != jitter or jitter < 0 or mean - jitter < 1:
            raise ConfigError("fixed(mean, jitter) needs integers with mean - jitter >= 1")
        return ("fixed", int(mean), int(jitter))
    if isinstance(values, (tuple, list)) and len(values) == 1 and values[0] in ("cheap", "expensive"):
        return (values[0],)
    raise ConfigError(f"unknown value mode {values!r}")


@dataclass(frozen=True)
class SimConfig:
    t_pay: int = 1000
    endpoints: str = "uniform"
    values: tuple = ("cheap",)
    duration: float = 1.0
    retries: int = 1
    seed: int = 0
    cheap_msat: int = 1000
    weight_params: WeightParams = field(default_factory=WeightParams)

    def __post_init__(self):
        check_positive_int(self.t_pay, "t_pay")
        if self.endpoints not in ("uniform", "weighted"):
            raise ConfigError(f"endpoints must be 'uniform' or 'weighted', got {self.endpoints!r}")
        object.__setattr__(self, "values", parse_values(self.values))
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        check_positive_int(self.retries, "retries")
        check_positive_int(self.cheap_msat, "cheap_msat")

    @property
    def n_payments(self) -> int:
        return int(round(self.t_pay * self.duration))

    @property
    def horizon_ms(self) -> float:
        return self.duration * MS_PER_DAY


@dataclass(frozen=True)
class Outcome:
    """``Success`` or ``Fail(i)``; ``i`` is the 1-based failing hop, 0 for no route."""

    success: bool
    failed_index: int | None = None

    def __str__(self):
        return "success" if self.success else f"fail({self.failed_index})"


SUCCESS = Outcome(True)


def Fail(index: int) -> Outcome:  # noqa: N802 - reads like a constructor
    return Outcome(False, index)


@dataclass
class PaymentEvent:
    id: int
    sender: str
    recipient: str
    amount: int
    client: str
    attempts: list[tuple[Path, Outcome]] = field(default_factory=list)
    outcome: Outcome = SUCCESS
    start_time: float = 0.0
    end_time: float = 0.0

    @property
    def succeeded(self) -> bool:
        return self.outcome.success

    @property
    def path(self) -> Path | None:
        """Path of the last attempt, or ``None`` when no route existed."""
        return self.attempts[-1][0] if self.attempts else None

    @property
    def length(self) -> int | None:
        path = self.path
        return None if path is None else path.length

    @property
    def reached_length(self) -> int | None:
        """Nodes the payment actually reached.

        A success reaches its whole path.  A failure at hop ``i`` travels
        from the sender to the far end of that hop, ``i + 1`` nodes; nodes
        further down the route never see it.
        """
        if not self.attempts:
            return None
        if self.succeeded:
            return self.length
        return self.outcome.failed_index + 1


@dataclass
class EventLog:
    events: list[PaymentEvent]
    duration: float
    initial_balances: dict[str, int]
    config: SimConfig | None = None

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def successes(self) -> list[PaymentEvent]:
        return [e for e in self.events if e.succeeded]

    def window(self, start: float, end: float) -> list[PaymentEvent]:
        """Successful payments completing in ``(start, end]``."""
        return [e for e in self.events if e.succeeded and start < e.end_time <= end]


class EndpointSampler:
    """Draws a sender, then a distinct recipient, uniformly or proportionally to degree."""

    def __init__(self, graph: NetworkGraph, mode: str):
        self.nodes = graph.node_ids()
        if len(self.nodes) < 2:
            raise ValueError("need at least two nodes")
        if mode == "uniform":
            self.cdf = None
        elif mode == "weighted":
            deg = np.array([graph.degree(n) for n in self.nodes], dtype=float)
            if np.count_nonzero(deg) < 2:
                raise ValueError("weighted endpoints need two nodes with channels")
            self.cdf = np.cumsum(deg / deg.sum())
            self.cdf[-1] = 1.0
        else:
            raise ConfigError(f"unknown endpoint mode {mode!r}")

    def _draw(self, rng: np.random.Generator) -> int:
        if self.cdf is None:
            return int(rng.integers(len(self.nodes)))
        return min(int(np.searchsorted(self.cdf, rng.random(), side="right")), len(self.nodes) - 1)

    def __call__(self, rng: np.random.Generator) -> tuple[str, str]:
        # sender first, then the recipient from the same law restricted to the other nodes
        i = self._draw(rng)
        while (j := self._draw(rng)) == i:
            pass
        return self.nodes[i], self.nodes[j]


def sample_endpoints(graph: NetworkGraph, mode: str, rng) -> tuple[str, str]:
    """Distinct (sender, recipient) drawn uniformly or proportionally to degree."""
    return EndpointSampler(graph, mode)(check_rng(rng))


def payment_value(graph: NetworkGraph, sender: str, recipient: str, mode, rng,
                  *, cheap_msat: int = 1000, router: Router | None = None) -> int:
    """Payment amount in msat; 0 means the payment is skipped (no route).

    ``expensive`` is the most the sender can push through the widest path:
    its own channel is limited by its current outbound balance, every later
    hop by capacity.
    """
    mode = parse_values(mode)
    if mode[0] == "cheap":
        return cheap_msat
    if mode[0] == "expensive":
        router = router or get_router(graph)
        balances = graph if all(ch.balance1_msat is not None
                                for ch in graph.channels_of(sender)) else None
        return router.max_routable_amount(sender, recipient, balances)
    _, mean, jitter = mode
    rng = check_rng(rng)
    return int(rng.integers(mean - jitter, mean + jitter + 1)) * MSAT_PER_SAT


def _attempt(graph: NetworkGraph, path: Path) -> tuple[Outcome, float]:
    """Try ``path``; returns the outcome and the round-trip latency it took."""
    done = []
    latency = 0.0
    outcome = SUCCESS
    for i, (hop, amt) in enumerate(zip(path.hops, path.per_hop_amount)):
        latency += graph.latency(hop.src, hop.dst)
        ch = graph.channels[hop.cid]
        if ch.balance_from(hop.src) < amt:
            outcome = Fail(i + 1)
            break
        ch.transfer(hop.src, amt)
        done.append((ch, hop, amt))
    if not outcome.success:
        for ch, hop, amt in reversed(done):
            ch.transfer(hop.dst, amt)
    return outcome, 2 * latency


def execute_payment(graph: NetworkGraph, sender: str, recipient: str, amount: int,
                    client: str, retries: int = 1, *, router: Router | None = None,
                    start_time: float = 0.0, payment_id: int = 0,
                    cached: bool = True) -> PaymentEvent:
    """Route and settle one payment, trying up to ``retries`` paths in total.

    ``cached`` serves routes from the router's per-recipient table, which
    pays off when amounts repeat.
    """
    if amount <= 0:
        raise ValueError("amount must be positive")
    check_positive_int(retries, "retries")
    router = router or get_router(graph)
    if retries == 1:
        search = router.route if cached else router.find_path
        path = search(sender, recipient, amount, client)
        paths = [path] if path is not None else []
    else:
        paths = router.k_shortest_paths(sender, recipient, amount, retries, client)
    event = PaymentEvent(payment_id, sender, recipient, amount, client,
                         start_time=start_time, end_time=start_time)
    if not paths:
        event.outcome = Fail(0)
        return event
    for path in paths:
        outcome, elapsed = _attempt(graph, path)
        event.attempts.append((path, outcome))
        event.end_time += elapsed
        event.outcome = outcome
        if outcome.success:
            break
    return event


def apply_payment(graph: NetworkGraph, path: Path) -> None:
    """Settle ``path`` unconditionally (used for replaying logs)."""
    for hop, amt in zip(path.hops, path.per_hop_amount):
        graph.channels[hop.cid].transfer(hop.src, amt)


def replay(graph: NetworkGraph, log: EventLog, until: float | None = None) -> NetworkGraph:
    """Copy of ``graph`` at the log's initial balances with successes applied in order."""
    out = graph.copy()
    out.restore_balances(log.initial_balances)
    for event in log.events:
        if until is not None and event.end_time > until:
            continue
        if event.succeeded:
            apply_payment(out, event.path)
    return out


def run_simulation(graph: NetworkGraph, config: SimConfig, *, router: Router | None = None,
                   inplace: bool = False) -> EventLog:
    """Simulate ``t_pay * duration`` payments; ``graph`` is left untouched unless ``inplace``."""
    work = graph if inplace else graph.copy()
    if router is None:
        router = get_router(graph, config.weight_params)
    elif router.params != config.weight_params:
        raise ConfigError("router weight parameters differ from the simulation config")
    for nid, attrs in work.nodes.items():
        if attrs.client not in CLIENTS:
            raise ConfigError(f"node {nid} has no client assigned; run assign_attributes first")
    initial = work.balances()
    cached = config.values[0] != "expensive"
    rng = check_rng(config.seed)
    n = config.n_payments
    times = np.sort(rng.uniform(0.0, config.horizon_ms, size=n)) if n else np.empty(0)
    sampler = EndpointSampler(work, config.endpoints)
    events = []
    for pid, t in enumerate(times):
        sender, recipient = sampler(rng)
        amount = payment_value(work, sender, recipient, config.values, rng,
                               cheap_msat=config.cheap_msat, router=router)
        client = work.nodes[sender].client
        if amount <= 0:
            events.append(PaymentEvent(pid, sender, recipient, 0, client, outcome=Fail(0),
                                       start_time=float(t), end_time=float(t)))
            continue
        events.append(execute_payment(work, sender, recipient, amount, client, config.retries,
                                      router=router, start_time=float(t), payment_id=pid,
                                      cached=cached))
    return EventLog(events, config.duration, initial, config)


def observed_lengths(log, outcome: str = "success") -> list[int]:
    """Path lengths as seen by on-path nodes, for ``success``, ``fail`` or ``all`` payments.

    Failures count the prefix up to the failing hop (see
    :attr:`PaymentEvent.reached_length`); unroutable payments are skipped.
    """
    events = log.events if isinstance(log, EventLog) else list(log)
    if outcome == "success":
        chosen = [e for e in events if e.succeeded]
    elif outcome == "fail":
        chosen = [e for e in events if not e.succeeded and e.attempts]
    elif outcome == "all":
        chosen = [e for e in events if e.attempts]
    else:
        raise ValueError(f"unknown outcome filter {outcome!r}")
    return [e.reached_length for e in chosen]


def path_length_distribution(log, outcome: str = "success") -> dict[int, float]:
    """Empirical Pr[L = l | outcome] over routed payments."""
    lengths = observed_lengths(log, outcome)
    if not lengths:
        raise EmptyLogError(f"no {outcome} payments in log")
    counts = Counter(lengths)
    total = sum(counts.values())
    return {length: counts[length] / total for length in sorted(counts)}


def forwards_per_node(log) -> Counter:
    """How many successful payments each node forwarded."""
    counts: Counter = Counter()
    for event in log:
        if event.succeeded:
            counts.update(event.path.nodes[1:-1])
    return counts


def degree_bucket(degree: int) -> str | None:
    for lo, hi in DEGREE_BUCKETS:
        if degree >= lo and (hi is None or degree < hi):
            return f"{lo}-{hi}" if hi is not None else f"{lo}+"
    return None


def throughput_report(log: EventLog, graph: NetworkGraph, days: float | None = None) -> dict[str, dict]:
    """Mean forwarded payments per node per day in each channel-count bucket."""
    days = log.duration if days is None else days
    if days <= 0:
        raise ValueError("throughput needs a horizon of at least one day")
    forwards = forwards_per_node(log)
    totals: dict[str, list] = {degree_bucket(lo): [0, 0] for lo, _ in DEGREE_BUCKETS}
    for nid in graph.node_ids():
        bucket = degree_bucket(graph.degree(nid))
        if bucket is None:
            continue
        totals[bucket][0] += 1
        totals[bucket][1] += forwards.get(nid, 0)
    return {
        bucket: {"nodes": n, "forwards": f, "mean_per_day": (f / n / days) if n else 0.0}
        for bucket, (n, f) in totals.items()
    }


EVENT_FIELDS = ["payment_id", "attempt", "sender", "recipient", "amount_msat", "path",
                "outcome", "failed_index", "start_ms", "end_ms"]


def write_event_log(log: EventLog, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_FIELDS)
        for e in log:
            rows = e.attempts or [(None, e.outcome)]
            for k, (p, outcome) in enumerate(rows):
                writer.writerow([
                    e.id, k, e.sender, e.recipient, e.amount,
                    "" if p is None else " ".join(p.nodes),
                    "success" if outcome.success else "fail",
                    "" if outcome.success else outcome.failed_index,
                    f"{e.start_time:.3f}", f"{e.end_time:.3f}",
                ])


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=seed)
