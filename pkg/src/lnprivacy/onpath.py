"""Sender and recipient inference by an intermediate node on the path.

An adversary on a path guesses that its predecessor is the sender (or its
successor the recipient).  Given the distribution of path lengths L (nodes,
endpoints included), the guess is certainly right when it is the only
intermediate node; on a clique every intermediate position is equally likely,
which gives the worst case for the adversary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from types import MappingProxyType

from ._validation import check_rng
from .exceptions import DistributionError, EmptyLogError
from .sim import observed_lengths

MIN_LENGTH = 3
MAX_LENGTH = 20
MODES = ("lower_bound", "clique")
TARGETS = ("sender", "recipient")


@dataclass(frozen=True)
class LengthDistribution:
    """Pr[L = l | outcome] for l in 3..20."""

    probs: MappingProxyType
    outcome: str = "success"

    def __init__(self, probs, outcome: str = "success"):
        if outcome not in ("success", "fail"):
            raise DistributionError(f"outcome must be 'success' or 'fail', got {outcome!r}")
        clean = {}
        for length, p in probs.items():
            if int(length) != length or not MIN_LENGTH <= length <= MAX_LENGTH:
                raise DistributionError(f"length {length} outside {MIN_LENGTH}..{MAX_LENGTH}")
            p = float(p)
            if not 0.0 <= p <= 1.0:
                raise DistributionError(f"probability {p} for length {length} outside [0, 1]")
            if p:
                clean[int(length)] = p
        total = math.fsum(clean.values())
        if abs(total - 1.0) > 1e-9:
            raise DistributionError(f"probabilities sum to {total}, not 1")
        if outcome == "fail" and clean.get(MIN_LENGTH, 0.0) != 0.0:
            raise DistributionError("a failed payment cannot be observed at L=3")
        object.__setattr__(self, "probs", MappingProxyType(dict(sorted(clean.items()))))
        object.__setattr__(self, "outcome", outcome)

    def __getitem__(self, length: int) -> float:
        return self.probs.get(length, 0.0)

    @classmethod
    def from_lengths(cls, lengths, outcome: str = "success") -> "LengthDistribution":
        """Empirical distribution over lengths an adversary can observe.

        Successes need an intermediate node (L >= 3); failures also need a
        node past the adversary to fail at (L >= 4).  Shorter paths are
        dropped and the rest renormalized.
        """
        floor = MIN_LENGTH if outcome == "success" else MIN_LENGTH + 1
        kept = [int(x) for x in lengths if x is not None and x >= floor]
        if not kept:
            raise EmptyLogError(f"no {outcome} paths with L >= {floor}")
        counts: dict[int, int] = {}
        for x in kept:
            counts[x] = counts.get(x, 0) + 1
        return cls({x: c / len(kept) for x, c in counts.items()}, outcome)

    @classmethod
    def from_log(cls, log, outcome: str = "success") -> "LengthDistribution":
        """Distribution of the lengths on-path nodes observe; a failure only
        reaches the far end of its failing hop."""
        return cls.from_lengths(observed_lengths(log, outcome), outcome)


@dataclass(frozen=True)
class InferenceResult:
    p_success: float
    p_fail: float
    mode: str
    target: str


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _formula(dist: LengthDistribution, mode: str, first: int) -> float:
    _check_mode(mode)
    if mode == "lower_bound":
        return dist[first]
    offset = first - 1
    return math.fsum(p / (length - offset) for length, p in dist.probs.items())


def sender_success_probability(dist: LengthDistribution, mode: str = "lower_bound") -> float:
    """Pr[predecessor is the sender | success]."""
    if dist.outcome != "success":
        raise DistributionError("expected a success-conditioned distribution")
    return _formula(dist, mode, MIN_LENGTH)


def sender_fail_probability(dist: LengthDistribution, mode: str = "lower_bound") -> float:
    """Pr[predecessor is the sender | fail]; the failing node must lie past the adversary."""
    if dist.outcome != "fail":
        raise DistributionError("expected a fail-conditioned distribution")
    return _formula(dist, mode, MIN_LENGTH + 1)


def recipient_probabilities(dist: LengthDistribution, mode: str = "lower_bound") -> float:
    """Pr[successor is the recipient], mirroring the sender formulas."""
    return _formula(dist, mode, MIN_LENGTH if dist.outcome == "success" else MIN_LENGTH + 1)


def infer(success: LengthDistribution, fail: LengthDistribution | None, mode: str,
          target: str = "sender") -> InferenceResult:
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    if target == "sender":
        ps = sender_success_probability(success, mode)
        pf = sender_fail_probability(fail, mode) if fail is not None else math.nan
    else:
        ps = recipient_probabilities(success, mode)
        pf = recipient_probabilities(fail, mode) if fail is not None else math.nan
    return InferenceResult(ps, pf, mode, target)


def empirical_adversary_check(log, adversaries=None, seed=None) -> tuple[float, float]:
    """Monte-Carlo accuracy of the predecessor/successor guesses on successes.

    For every successful payment with an intermediate node, one adversary is
    drawn uniformly among its intermediates (restricted to ``adversaries``
    when given) and guesses its neighbours.  Returns (sender accuracy,
    recipient accuracy).
    """
    rng = check_rng(seed)
    allowed = None if adversaries is None else set(adversaries)
    hits_s = hits_r = n = 0
    for event in log:
        if not event.succeeded or event.length < MIN_LENGTH:
            continue
        nodes = event.path.nodes
        positions = [i for i in range(1, len(nodes) - 1)
                     if allowed is None or nodes[i] in allowed]
        if not positions:
            continue
        i = positions[int(rng.integers(len(positions)))]
        hits_s += nodes[i - 1] == event.sender
        hits_r += nodes[i + 1] == event.recipient
        n += 1
    if n == 0:
        raise EmptyLogError("no multi-hop successful payments to observe")
    return hits_s / n, hits_r / n


RESULT_FIELDS = ["scenario", "target", "outcome", "mode", "probability"]


def result_rows(scenario: str, success: LengthDistribution,
                fail: LengthDistribution | None) -> list[list]:
    rows = []
    for target in TARGETS:
        for mode in MODES:
            res = infer(success, fail, mode, target)
            rows.append([scenario, target, "success", mode, res.p_success])
            if fail is not None:
                rows.append([scenario, target, "fail", mode, res.p_fail])
    return rows


def write_results(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        writer.writerows([r[:4] + [f"{r[4]:.12g}"] for r in rows])
