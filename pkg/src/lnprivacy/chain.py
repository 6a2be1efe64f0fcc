"""On-chain heuristics for private channels.

A funding transaction has a distinctive shape (one P2WSH output of bounded
value, SegWit-compatible inputs, at most one change output) and so does a
cooperative or unilateral close (a single 2-of-2 multisig input with a
non-zero sequence).  Wallets that open several channels tend to spend the
change of one opening into the next, which links channels of one owner into
a peeling chain; public channels in such a chain reveal who the owner is.

Script classes are taken as given in the input records.  An optional
``address`` on outputs identifies the locking script, so reuse of a P2WSH
script across transactions can be detected.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_rng
from .exceptions import ConfigError, DatasetError

INPUT_CLASSES = ("p2wpkh", "p2sh", "p2wsh-multisig-2of2", "other")
OUTPUT_CLASSES = ("p2wsh", "other")
FUNDING_INPUTS = ("p2wpkh", "p2sh")
MULTISIG = "p2wsh-multisig-2of2"
MAX_FUNDING_SAT = 16_777_215


@dataclass(frozen=True)
class TxInput:
    prev_txid: str
    prev_index: int
    script_class: str
    value_sat: int
    sequence: int


@dataclass(frozen=True)
class TxOutput:
    index: int
    script_class: str
    value_sat: int
    spent_by: tuple[str, int] | None = None
    address: str | None = None


@dataclass(frozen=True)
class TransactionRecord:
    txid: str
    block_height: int
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]

    def __post_init__(self):
        for i in self.inputs:
            if i.script_class not in INPUT_CLASSES:
                raise DatasetError(f"{self.txid}: unknown input class {i.script_class!r}")
            if i.value_sat < 0:
                raise DatasetError(f"{self.txid}: negative input value")
        for k, o in enumerate(self.outputs):
            if o.script_class not in OUTPUT_CLASSES:
                raise DatasetError(f"{self.txid}: unknown output class {o.script_class!r}")
            if o.value_sat < 0:
                raise DatasetError(f"{self.txid}: negative output value")
            if o.index != k:
                raise DatasetError(f"{self.txid}: outputs must be listed in index order")

    @classmethod
    def from_dict(cls, d: dict) -> "TransactionRecord":
        try:
            inputs = tuple(TxInput(str(i["prev_txid"]), int(i["prev_index"]), i["script_class"],
                                   int(i["value_sat"]), int(i["sequence"])) for i in d["inputs"])
            outputs = tuple(TxOutput(int(o["index"]), o["script_class"], int(o["value_sat"]),
                                     None if o.get("spent_by") is None
                                     else (str(o["spent_by"][0]), int(o["spent_by"][1])),
                                     o.get("address")) for o in d["outputs"])
            return cls(str(d["txid"]), int(d["block_height"]), inputs, outputs)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DatasetError):
                raise
            raise DatasetError(f"bad transaction record {d.get('txid', '?')!r}: {exc}") from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        for o in d["outputs"]:
            if o["spent_by"] is not None:
                o["spent_by"] = list(o["spent_by"])
            if o["address"] is None:
                del o["address"]
        return d

    def p2wsh_outputs(self) -> list[TxOutput]:
        return [o for o in self.outputs if o.script_class == "p2wsh"]


class Dataset:
    """Transactions by txid, with spend links checked for consistency.

    Inputs may reference transactions outside the dataset; those links are
    simply not followed.
    """

    def __init__(self, transactions):
        self.txs: dict[str, TransactionRecord] = {}
        for tx in transactions:
            if tx.txid in self.txs:
                raise DatasetError(f"duplicate txid {tx.txid}")
            self.txs[tx.txid] = tx
        for tx in self.txs.values():
            for k, inp in enumerate(tx.inputs):
                prev = self.txs.get(inp.prev_txid)
                if prev is None:
                    continue
                if inp.prev_index >= len(prev.outputs):
                    raise DatasetError(f"{tx.txid} spends missing output {inp.prev_txid}:{inp.prev_index}")
                if prev.outputs[inp.prev_index].spent_by != (tx.txid, k):
                    raise DatasetError(f"{tx.txid} input {k} disagrees with the spent output")
            for o in tx.outputs:
                if o.spent_by is None or o.spent_by[0] not in self.txs:
                    continue
                spender = self.txs[o.spent_by[0]]
                k = o.spent_by[1]
                if k >= len(spender.inputs) or (spender.inputs[k].prev_txid, spender.inputs[k].prev_index) != (tx.txid, o.index):
                    raise DatasetError(f"{tx.txid}:{o.index} spend link not mirrored by {spender.txid}")
        self.address_counts = Counter(o.address for tx in self.txs.values()
                                      for o in tx.p2wsh_outputs() if o.address is not None)

    def __len__(self) -> int:
        return len(self.txs)

    def __iter__(self):
        return iter(self.txs.values())

    def __contains__(self, txid) -> bool:
        return txid in self.txs

    def __getitem__(self, txid: str) -> TransactionRecord:
        return self.txs[txid]

    def get(self, txid: str):
        return self.txs.get(txid)

    def spender(self, output: TxOutput):
        return None if output.spent_by is None else self.txs.get(output.spent_by[0])


def load_jsonl(path) -> Dataset:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(TransactionRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return Dataset(records)


def write_jsonl(dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tx in sorted(dataset, key=lambda t: (t.block_height, t.txid)):
            fh.write(json.dumps(tx.to_dict(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class OpeningRules:
    """Switches for the conjunctive opening rules; all on by default."""

    window: bool = True
    max_outputs: bool = True
    single_p2wsh: bool = True
    max_value: bool = True
    unique_script: bool = True
    input_class: bool = True


@dataclass(frozen=True)
class ClosingRules:
    single_input: bool = True
    multisig_input: bool = True
    nonzero_sequence: bool = True
    max_outputs: bool = True


def opening_violations(tx: TransactionRecord, window=None, dataset: Dataset | None = None) -> list[str]:
    """Names of the opening rules ``tx`` breaks (empty for a candidate opening)."""
    bad = []
    if window is not None and not window[0] <= tx.block_height <= window[1]:
        bad.append("window")
    if len(tx.outputs) > 2:
        bad.append("max_outputs")
    p2wsh = tx.p2wsh_outputs()
    if len(p2wsh) != 1:
        bad.append("single_p2wsh")
    if any(o.value_sat > MAX_FUNDING_SAT for o in p2wsh):
        bad.append("max_value")
    if dataset is not None and any(o.address is not None and dataset.address_counts[o.address] > 1
                                   for o in p2wsh):
        bad.append("unique_script")
    if not tx.inputs or any(i.script_class not in FUNDING_INPUTS for i in tx.inputs):
        bad.append("input_class")
    return bad


def closing_violations(tx: TransactionRecord) -> list[str]:
    bad = []
    if len(tx.inputs) != 1:
        bad.append("single_input")
    if not tx.inputs or any(i.script_class != MULTISIG for i in tx.inputs):
        bad.append("multisig_input")
    if not tx.inputs or any(i.sequence == 0 for i in tx.inputs):
        bad.append("nonzero_sequence")
    if len(tx.outputs) > 2:
        bad.append("max_outputs")
    return bad


def classify_opening(tx: TransactionRecord, window=None, dataset: Dataset | None = None,
                     rules: OpeningRules = OpeningRules()) -> bool:
    """Whether ``tx`` looks like a channel funding transaction.

    ``window`` is an inclusive block range (``None`` accepts any height);
    script reuse is only checked against ``dataset`` when one is given.
    """
    return not any(getattr(rules, name) for name in opening_violations(tx, window, dataset))


def classify_closing(tx: TransactionRecord, rules: ClosingRules = ClosingRules()) -> bool:
    return not any(getattr(rules, name) for name in closing_violations(tx))


@dataclass
class ChannelLink:
    open_txid: str
    close_txid: str | None = None
    public: bool = False
    cluster_id: int | None = None
    participants: tuple = ()


class _Classifier:
    """Memoized opening/closing tests over one dataset."""

    def __init__(self, dataset: Dataset, window=None, opening_rules=OpeningRules(),
                 closing_rules=ClosingRules()):
        self.dataset = dataset
        self.window = window
        self.opening_rules = opening_rules
        self.closing_rules = closing_rules
        self._open: dict[str, bool] = {}
        self._close: dict[str, bool] = {}

    def is_open(self, tx) -> bool:
        if tx is None:
            return False
        hit = self._open.get(tx.txid)
        if hit is None:
            hit = self._open[tx.txid] = classify_opening(tx, self.window, self.dataset,
                                                         self.opening_rules)
        return hit

    def is_close(self, tx) -> bool:
        if tx is None:
            return False
        hit = self._close.get(tx.txid)
        if hit is None:
            hit = self._close[tx.txid] = classify_closing(tx, self.closing_rules)
        return hit

    def close_of(self, open_tx):
        """The classified closing that spends ``open_tx``'s funding output, if any."""
        for o in open_tx.p2wsh_outputs():
            spender = self.dataset.spender(o)
            if self.is_close(spender):
                return spender
        return None

    def funded_opens(self, close_tx) -> list:
        """Classified openings funded by outputs of ``close_tx``."""
        spenders = (self.dataset.spender(o) for o in close_tx.outputs)
        return [s for s in spenders if self.is_open(s)]


def match_open_close(dataset: Dataset, window=None, public_txids=(), *,
                     opening_rules: OpeningRules = OpeningRules(),
                     closing_rules: ClosingRules = ClosingRules()) -> list[ChannelLink]:
    """Candidate private channels: classified openings with their closings, if spent.

    Transactions in ``public_txids`` (opens or closes of announced channels)
    never appear in the result.
    """
    public = set(public_txids)
    cls = _Classifier(dataset, window, opening_rules, closing_rules)
    links = []
    for tx in sorted(dataset, key=lambda t: (t.block_height, t.txid)):
        if tx.txid in public or not cls.is_open(tx):
            continue
        close = cls.close_of(tx)
        if close is not None and close.txid in public:
            continue
        links.append(ChannelLink(tx.txid, None if close is None else close.txid))
    return links


class _DisjointSet:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _neighbours(cls: _Classifier, tx) -> list:
    """Transactions linked to ``tx`` by one peeling-chain step."""
    ds = cls.dataset
    out = []
    if cls.is_open(tx):
        for inp in tx.inputs:
            prev = ds.get(inp.prev_txid)
            if prev is None:
                continue
            spent = prev.outputs[inp.prev_index]
            if cls.is_open(prev) and spent.script_class != "p2wsh":
                out.append(prev)
            elif cls.is_close(prev) and len(cls.funded_opens(prev)) == 1:
                out.append(prev)
        for o in tx.outputs:
            spender = ds.spender(o)
            if o.script_class == "p2wsh":
                if cls.is_close(spender):
                    out.append(spender)
            elif cls.is_open(spender):
                out.append(spender)
    elif cls.is_close(tx):
        inp = tx.inputs[0]
        prev = ds.get(inp.prev_txid)
        if cls.is_open(prev) and prev.outputs[inp.prev_index].script_class == "p2wsh":
            out.append(prev)
        funded = cls.funded_opens(tx)
        if len(funded) == 1:
            out.extend(funded)
    return out


@dataclass
class TraceResult:
    chains: list[list[str]]
    new_opens: list[str]

    def chain_of(self) -> dict[str, int]:
        return {txid: k for k, chain in enumerate(self.chains) for txid in chain}


def trace_peeling_chains(dataset: Dataset, seeds, window=None, *,
                         opening_rules: OpeningRules = OpeningRules(),
                         closing_rules: ClosingRules = ClosingRules()) -> TraceResult:
    """Grow chains from known channel transactions.

    Links: an opening and the opening that spends its change output; an
    opening and the closing that spends its funding output; a closing and
    the opening funded by its output, when only one of its outputs funds an
    opening (with two, the outputs belong to different parties).  Tracing
    stops at unspent outputs and at transactions failing the heuristic.
    Each returned chain is sorted by height then txid.
    """
    seeds = list(dict.fromkeys(seeds))
    missing = [s for s in seeds if s not in dataset]
    if missing:
        raise DatasetError(f"seed transactions not in dataset: {missing[:3]}")
    cls = _Classifier(dataset, window, opening_rules, closing_rules)
    dsu = _DisjointSet()
    seen = set()
    stack = list(reversed(seeds))
    while stack:
        txid = stack.pop()
        if txid in seen:
            continue
        seen.add(txid)
        dsu.add(txid)
        for nb in _neighbours(cls, dataset[txid]):
            dsu.add(nb.txid)
            dsu.union(txid, nb.txid)
            if nb.txid not in seen:
                stack.append(nb.txid)
    groups: dict[str, list[str]] = {}
    for txid in seen:
        groups.setdefault(dsu.find(txid), []).append(txid)
    key = lambda t: (dataset[t].block_height, t)
    chains = sorted((sorted(g, key=key) for g in groups.values()), key=lambda c: key(c[0]))
    seed_set = set(seeds)
    new_opens = sorted((t for t in seen if t not in seed_set and cls.is_open(dataset[t])), key=key)
    return TraceResult(chains, new_opens)


@dataclass
class Cluster:
    cluster_id: int
    txids: list[str]
    opener: str | None = None
    public_opens: list[str] = field(default_factory=list)


@dataclass
class Attribution:
    clusters: list[Cluster]
    links: list[ChannelLink]

    def counts(self) -> dict[str, int]:
        """Private channels by number of attributed participants."""
        out = {"both": 0, "one": 0, "none": 0}
        for link in self.links:
            if not link.public:
                out[("none", "one", "both")[len(link.participants)]] += 1
        return out


def cluster_and_identify(chains, public_channel_endpoints, dataset: Dataset, window=None, *,
                         opening_rules: OpeningRules = OpeningRules(),
                         closing_rules: ClosingRules = ClosingRules()) -> Attribution:
    """Name the owner of each chain and the counterparties of its private channels.

    ``public_channel_endpoints`` maps the funding txid of each announced
    channel to its two node ids.  A cluster's opener is the single node all
    of its public channels share.  When a private channel's closing pays
    into an opening of another attributed cluster, that cluster's opener is
    taken as the second participant.
    """
    chains = chains.chains if isinstance(chains, TraceResult) else chains
    cls = _Classifier(dataset, window, opening_rules, closing_rules)
    clusters, where = [], {}
    for k, chain in enumerate(chains):
        cluster = Cluster(k, list(chain))
        common = None
        for txid in chain:
            where[txid] = k
            ends = public_channel_endpoints.get(txid)
            if ends is None:
                continue
            cluster.public_opens.append(txid)
            common = set(ends) if common is None else common & set(ends)
        if common is not None and len(common) == 1:
            cluster.opener = next(iter(common))
        clusters.append(cluster)
    links = []
    for cluster in clusters:
        for txid in cluster.txids:
            tx = dataset[txid]
            if not cls.is_open(tx):
                continue
            close = cls.close_of(tx)
            public = txid in public_channel_endpoints
            link = ChannelLink(txid, None if close is None else close.txid, public, cluster.cluster_id)
            if public:
                link.participants = tuple(public_channel_endpoints[txid])
            else:
                people = [] if cluster.opener is None else [cluster.opener]
                if close is not None:
                    for funded in cls.funded_opens(close):
                        other = where.get(funded.txid)
                        if other is None or other == cluster.cluster_id:
                            continue
                        x = clusters[other].opener
                        if x is not None and x not in people:
                            people.append(x)
                            break
                link.participants = tuple(people)
            links.append(link)
    return Attribution(clusters, links)


LINK_FIELDS = ["open_txid", "close_txid", "cluster_id", "participant1", "participant2"]


def write_links(links, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LINK_FIELDS)
        for link in links:
            p = list(link.participants) + ["", ""]
            writer.writerow([link.open_txid, link.close_txid or "",
                             "" if link.cluster_id is None else link.cluster_id, p[0], p[1]])


class PropertyHeuristic(BaseEstimator):
    """Transaction classifier in estimator form.

    ``fit`` records the dataset (needed for script reuse); ``predict``
    labels transactions ``"open"``, ``"close"`` or ``"other"``.
    """

    def __init__(self, window=None, opening_rules=None, closing_rules=None):
        self.window = window
        self.opening_rules = opening_rules
        self.closing_rules = closing_rules

    def fit(self, X, y=None):
        self.dataset_ = X if isinstance(X, Dataset) else Dataset(X)
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        dataset = getattr(self, "dataset_", None)
        if dataset is None:
            raise DatasetError("call fit before predict")
        orules = self.opening_rules or OpeningRules()
        crules = self.closing_rules or ClosingRules()
        labels = []
        for tx in X:
            if classify_opening(tx, self.window, dataset, orules):
                labels.append("open")
            elif classify_closing(tx, crules):
                labels.append("close")
            else:
                labels.append("other")
        return np.array(labels, dtype=object)


# ---------------------------------------------------------------- corpus

OPENING_DECOYS = ("window", "max_outputs", "single_p2wsh", "max_value", "unique_script", "input_class")
CLOSING_DECOYS = ("single_input", "multisig_input", "nonzero_sequence", "max_outputs")
DEFAULT_WINDOW = (500_000, 700_000)


@dataclass
class CorpusTruth:
    window: tuple[int, int]
    private_opens: set = field(default_factory=set)
    public_opens: set = field(default_factory=set)
    closes: set = field(default_factory=set)
    public_closes: set = field(default_factory=set)
    decoys: dict = field(default_factory=dict)  # txid -> (kind, rule)
    chains: list = field(default_factory=list)  # one set of txids per planted chain
    public_endpoints: dict = field(default_factory=dict)
    participants: dict = field(default_factory=dict)  # open txid -> (opener, counterparty)
    expected_counts: dict = field(default_factory=dict)

    @property
    def public_txids(self) -> set:
        return self.public_opens | self.public_closes


class _TxBuilder:
    def __init__(self, seed: int):
        self.seed = seed
        self.txs: dict[str, dict] = {}
        self.n = 0

    def _id(self, prefix: str = "") -> str:
        self.n += 1
        return hashlib.sha256(f"{prefix}{self.seed}:{self.n}".encode()).hexdigest()

    def external(self, cls: str = "p2wpkh", value: int = 100_000, sequence: int = 0xFFFFFFFF) -> dict:
        return {"prev_txid": self._id("ext"), "prev_index": 0, "script_class": cls,
                "value_sat": value, "sequence": sequence}

    def spend(self, txid: str, index: int, cls: str = "p2wpkh", sequence: int = 0xFFFFFFFF) -> dict:
        out = self.txs[txid]["outputs"][index]
        if out["spent_by"] is not None:
            raise AssertionError("double spend in corpus builder")
        return {"prev_txid": txid, "prev_index": index, "script_class": cls,
                "value_sat": out["value_sat"], "sequence": sequence}

    def add(self, height: int, inputs: list, outputs: list) -> str:
        """``outputs``: (script_class, value, address or None) triples."""
        txid = self._id("tx")
        for k, inp in enumerate(inputs):
            prev = self.txs.get(inp["prev_txid"])
            if prev is not None:
                prev["outputs"][inp["prev_index"]]["spent_by"] = [txid, k]
        self.txs[txid] = {
            "txid": txid, "block_height": int(height), "inputs": inputs,
            "outputs": [{"index": i, "script_class": c, "value_sat": int(v), "spent_by": None,
                         **({"address": a} if a else {})} for i, (c, v, a) in enumerate(outputs)],
        }
        return txid

    def unspent(self, txid: str, index: int) -> bool:
        return self.txs[txid]["outputs"][index]["spent_by"] is None

    def dataset(self) -> Dataset:
        return Dataset(TransactionRecord.from_dict(d) for d in self.txs.values())


def generate_corpus(n_transactions: int = 10_000, n_private: int = 500, n_public: int = 300,
                    n_decoys: int = 200, n_chains: int = 27, seed=None, *,
                    window=DEFAULT_WINDOW, close_fraction: float = 0.6,
                    close_funds_next: float = 0.15, shared_close: float = 0.1,
                    n_anonymous: int = 3) -> tuple[Dataset, CorpusTruth]:
    """Synthetic transaction set with planted channels, chains and decoys.

    Every planted channel belongs to one of ``n_chains`` owners.  An owner's
    openings follow each other through change outputs, or through the
    owner's share of an earlier closing.  Some closings pay both parties
    into new openings of their respective chains.  Each decoy breaks exactly
    one opening or closing rule; the rest of the corpus is plain payments.
    A closing output that alone funds an opening always belongs to the
    channel's opener.  ``n_anonymous`` chains hold a single public channel,
    so their owner cannot be singled out.
    """
    rng = check_rng(seed)
    n_channels = n_private + n_public
    if n_chains < 1 or n_channels < n_chains:
        raise ConfigError("need at least one channel per chain")
    if not 0 <= n_anonymous <= n_chains or n_public < n_chains:
        raise ConfigError("need one public channel per chain and n_anonymous <= n_chains")
    b = _TxBuilder(int(rng.integers(2**31)))
    truth = CorpusTruth(tuple(window))
    lo, hi = window
    owners = [f"N{k:04d}" for k in range(n_chains)]
    others = [f"N{k:04d}" for k in range(n_chains, n_chains + 10 * n_chains)]

    per_chain = np.ones(n_chains, dtype=int) + rng.multinomial(n_channels - n_chains,
                                                               np.full(n_chains, 1 / n_chains))
    # one public channel per chain, the rest spread over non-anonymous chains
    anonymous = set(rng.choice(n_chains, size=n_anonymous, replace=False).tolist())
    offsets = np.concatenate([[0], np.cumsum(per_chain)])
    public_flags = np.zeros(n_channels, dtype=bool)
    for k in range(n_chains):
        public_flags[offsets[k] + int(rng.integers(per_chain[k]))] = True
    free = [i for k in range(n_chains) if k not in anonymous
            for i in range(offsets[k], offsets[k + 1]) if not public_flags[i]]
    if len(free) < n_public - n_chains:
        raise ConfigError("too many public channels for the chain layout")
    public_flags[rng.choice(free, size=n_public - n_chains, replace=False)] = True

    def address() -> str:
        return b._id("addr")[:40]

    def open_tx(height, inputs, value):
        outs = [("p2wsh", value, address()), ("other", int(rng.integers(10_000, 5_000_000)), None)]
        if rng.random() < 0.5:
            outs.reverse()
        txid = b.add(height, inputs, outs)
        fund = next(o["index"] for o in b.txs[txid]["outputs"] if o["script_class"] == "p2wsh")
        return txid, fund

    chains_opens: list[list] = [[] for _ in range(n_chains)]
    meta: dict[str, dict] = {}
    span = (hi - lo) // 2
    flags = iter(public_flags)

    def close_tx(txid, height, outs=None):
        m = meta[txid]
        outs = outs or [("other", int(rng.integers(1_000, 1_000_000)), None) for _ in range(2)]
        seq = int(rng.integers(1, 2**32))
        m["close"] = b.add(height, [b.spend(txid, m["fund"], MULTISIG, seq)], outs)
        return m["close"]

    for k in range(n_chains):
        heights = np.sort(rng.integers(lo, lo + span, size=per_chain[k]))
        prev = None
        for j, h in enumerate(heights):
            public = bool(next(flags))
            earlier = [t for t in chains_opens[k] if "close" not in meta[t] and meta[t]["height"] < h]
            if prev is None:
                inputs = [b.external("p2wpkh" if rng.random() < 0.7 else "p2sh")]
            elif earlier and rng.random() < close_funds_next:
                # the owner's share of an earlier channel's closing funds this one
                old = earlier[int(rng.integers(len(earlier)))]
                close = close_tx(old, int(rng.integers(meta[old]["height"] + 1, h + 1)))
                inputs = [b.spend(close, 0)]
                if rng.random() < 0.3:
                    b.add(h, [b.spend(close, 1)], [("other", 500, None)])
            else:
                inputs = [b.spend(prev, 1 - meta[prev]["fund"])]
            txid, fund = open_tx(h, inputs, int(rng.integers(20_000, MAX_FUNDING_SAT + 1)))
            chains_opens[k].append(txid)
            meta[txid] = {"chain": k, "public": public, "fund": fund, "height": int(h),
                          "cp": others[int(rng.integers(len(others)))]}
            prev = txid
        if rng.random() < 0.5 and b.unspent(prev, 1 - meta[prev]["fund"]):
            b.add(heights[-1] + 1, [b.spend(prev, 1 - meta[prev]["fund"])], [("other", 1000, None)])

    def later_open(k, height):
        cands = [t for t in chains_opens[k] if meta[t]["height"] > height]
        return cands[int(rng.integers(len(cands)))] if cands else None

    for k in range(n_chains):
        for txid in chains_opens[k]:
            m = meta[txid]
            if "close" in m or rng.random() >= close_fraction:
                continue
            h_close = m["height"] + int(rng.integers(1, 2000))
            if not m["public"] and n_chains > 1 and rng.random() < shared_close:
                other_chain = int(rng.integers(n_chains - 1))
                other_chain += other_chain >= k
                mine, theirs = later_open(k, h_close), later_open(other_chain, h_close)
                if mine is not None and theirs is not None:
                    # both shares are consolidated into later openings of each party
                    m["cp"] = owners[other_chain]
                    close = close_tx(txid, h_close)
                    _add_input(b, mine, b.spend(close, 0))
                    _add_input(b, theirs, b.spend(close, 1))
                    continue
            close = close_tx(txid, h_close)
            if rng.random() < 0.3:
                b.add(h_close + 5, [b.spend(close, int(rng.integers(2)))], [("other", 500, None)])

    for txid, m in meta.items():
        k = m["chain"]
        owner = owners[k]
        if m["public"]:
            truth.public_opens.add(txid)
            truth.public_endpoints[txid] = (owner, m["cp"])
            if "close" in m:
                truth.public_closes.add(m["close"])
        else:
            truth.private_opens.add(txid)
            if "close" in m:
                truth.closes.add(m["close"])
        truth.participants[txid] = (owner, m["cp"])
    truth.closes |= truth.public_closes
    truth.chains = []
    for k in range(n_chains):
        members = set()
        for t in chains_opens[k]:
            members.add(t)
            if "close" in meta[t]:
                members.add(meta[t]["close"])
        truth.chains.append(members)

    _add_decoys(b, rng, truth, n_decoys, window, address)
    n_fill = n_transactions - len(b.txs)
    if n_fill < 0:
        raise ConfigError("n_transactions too small for the planted content")
    _add_filler(b, rng, n_fill, window)
    truth.expected_counts = _expected_counts(truth, meta, owners)
    return b.dataset(), truth


def _add_input(b: _TxBuilder, txid: str, inp: dict) -> None:
    tx = b.txs[txid]
    k = len(tx["inputs"])
    tx["inputs"].append(inp)
    b.txs[inp["prev_txid"]]["outputs"][inp["prev_index"]]["spent_by"] = [txid, k]


def _add_decoys(b, rng, truth, n_decoys, window, address) -> None:
    lo, hi = window
    kinds = [("open", r) for r in OPENING_DECOYS] + [("close", r) for r in CLOSING_DECOYS]
    for i in range(n_decoys):
        kind, rule = kinds[i % len(kinds)]
        h = int(rng.integers(lo, hi))
        value = int(rng.integers(20_000, MAX_FUNDING_SAT + 1))
        if kind == "open":
            inputs = [b.external()]
            outs = [("p2wsh", value, address()), ("other", 50_000, None)]
            if rule == "window":
                h = lo - 1 - int(rng.integers(0, 50_000))
            elif rule == "max_outputs":
                outs.append(("other", 20_000, None))
            elif rule == "single_p2wsh":
                outs[1] = ("p2wsh", 30_000, address())
            elif rule == "max_value":
                outs[0] = ("p2wsh", MAX_FUNDING_SAT + 1 + int(rng.integers(0, 10**7)), address())
            elif rule == "unique_script":
                # a P2WSH script also used by a plain payment elsewhere
                shared = address()
                outs[0] = ("p2wsh", value, shared)
                b.add(h, [b.external()], [("p2wsh", 10_000, shared), ("other", 1, None), ("other", 2, None)])
            elif rule == "input_class":
                inputs = [b.external("other")]
        else:
            inputs = [b.external(MULTISIG, value, int(rng.integers(1, 2**32)))]
            outs = [("other", value // 2, None), ("other", value // 3, None)]
            if rule == "single_input":
                inputs.append(b.external(MULTISIG, value, 1))
            elif rule == "multisig_input":
                inputs = [b.external("p2wpkh", value, 1)]
            elif rule == "nonzero_sequence":
                inputs = [b.external(MULTISIG, value, 0)]
            elif rule == "max_outputs":
                outs.append(("other", 1000, None))
            # keep closing decoys away from the opening rules as well
            outs = [(c, v, None) for c, v, _ in outs]
        txid = b.add(h, inputs, outs)
        truth.decoys[txid] = (kind, rule)


def _add_filler(b, rng, n_fill, window) -> None:
    lo, hi = window
    pool = []
    for _ in range(n_fill):
        h = int(rng.integers(lo - 50_000, hi))
        inputs = []
        if pool and rng.random() < 0.5:
            txid, idx = pool.pop(int(rng.integers(len(pool))))
            if b.unspent(txid, idx):
                inputs.append(b.spend(txid, idx))
        if not inputs:
            inputs.append(b.external())
        n_out = int(rng.integers(1, 4))
        txid = b.add(h, inputs, [("other", int(rng.integers(1_000, 10**7)), None) for _ in range(n_out)])
        pool.extend((txid, i) for i in range(n_out))


def _expected_counts(truth: CorpusTruth, meta, owners) -> dict[str, int]:
    """Attribution outcome implied by the planted structure."""
    opener_of = {}
    for k, members in enumerate(truth.chains):
        common = None
        for t in members:
            if t in truth.public_endpoints:
                ends = set(truth.public_endpoints[t])
                common = ends if common is None else common & ends
        opener_of[k] = next(iter(common)) if common is not None and len(common) == 1 else None
    chain_by_owner = {owners[k]: k for k in range(len(owners))}
    counts = {"both": 0, "one": 0, "none": 0}
    for txid in truth.private_opens:
        m = meta[txid]
        known = 0 if opener_of[m["chain"]] is None else 1
        other = chain_by_owner.get(m["cp"])
        if other is not None and "close" in m and opener_of[other] is not None:
            known += 1
        counts[("none", "one", "both")[known]] += 1
    return counts
