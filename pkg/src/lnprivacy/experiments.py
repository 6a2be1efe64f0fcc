"""Scenario files and the pipeline that runs them.

A scenario file is TOML holding a list of ``[[scenario]]`` tables.  Each
scenario names a snapshot (a JSON file or a ``synthetic`` generator spec),
an optional traffic section ``sim`` and any of the analysis sections
``onpath``, ``throughput``, ``discovery``, ``budget``, ``probe`` and
``chain``.  Every section writes CSV files into the scenario's output
directory, and ``summary.json`` collects the headline numbers.
"""

from __future__ import annotations

import csv
import json
import math
import numbers
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import chain as chainmod
from ._validation import derive_seed
from .discovery import DEFAULT_TAUS, EVAL_FIELDS, recall_vs_budget, run_discovery, tau_sweep, write_inferred
from .exceptions import ConfigError, EmptyLogError, LNPrivacyError
from .graph import assign_attributes, assign_balances, load_snapshot
from .onpath import LengthDistribution, empirical_adversary_check, result_rows, write_results
from .probe import COVERAGES, attack_cost, snapshot_network, top_degree_nodes, write_snapshots
from .sim import SimConfig, observed_lengths, replay, run_simulation, throughput_report, write_event_log
from .synthetic import synthetic_snapshot

_NUM = numbers.Real
_SCHEMA = {
    None: {"name": str, "description": str, "seed": int, "runs": int, "workers": int,
           "output_dir": str},
    "snapshot": {"path": str, "synthetic": dict, "balances": (str, list), "balances_seed": int,
                 "clients": (list, dict), "attributes_seed": int},
    "sim": {"t_pay": int, "duration": _NUM, "endpoints": str, "values": (str, list, dict),
            "retries": int, "cheap_msat": int, "write_events": bool},
    "onpath": {"empirical_check": bool},
    "throughput": {},
    "discovery": {"taus": list, "failure_probability": _NUM, "coverage": str, "top_n": int,
                  "slack_sat": int, "threshold_sat": int, "gap_filter": bool,
                  "keep_inferred": bool},
    "budget": {"n_values": list, "coverages": list, "tau_s": _NUM, "failure_probability": _NUM,
               "gap_filter": bool},
    "probe": {"channels_to_open": int, "per_channel_capacity": _NUM, "liquidity_price": list,
              "open_close_fee": _NUM, "reserve_fraction": _NUM, "snapshots": int, "tau_s": _NUM,
              "failure_probability": _NUM, "coverage": str},
    "chain": {"dataset": str, "public_channels": str, "corpus": dict, "window": list,
              "write_corpus": bool},
}
_SYNTHETIC_KEYS = {"n_nodes": int, "mean_degree": _NUM, "exponent": _NUM, "max_degree": int,
                   "private_fraction": _NUM, "declared_client_fraction": _NUM, "seed": int}
_CORPUS_KEYS = {"n_transactions": int, "n_private": int, "n_public": int, "n_decoys": int,
                "n_chains": int, "n_anonymous": int, "seed": int}
ANALYSES = ("onpath", "throughput", "discovery", "budget", "probe", "chain")
_NEEDS_SIM = ("onpath", "throughput", "discovery", "budget")


@dataclass
class Scenario:
    name: str
    seed: int = 0
    runs: int = 1
    workers: int = 1
    output_dir: str = ""
    description: str = ""
    snapshot: dict | None = None
    sim: SimConfig | None = None
    write_events: bool = True
    sections: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __post_init__(self):
        self.output_dir = self.output_dir or self.name


def _type_ok(value, expected) -> bool:
    expected = expected if isinstance(expected, tuple) else (expected,)
    if isinstance(value, bool) and bool not in expected:
        return False
    return isinstance(value, expected)


def _check_table(table: dict, schema: dict, where: str) -> None:
    for key, value in table.items():
        if key not in schema:
            raise ConfigError(f"{where}.{key}: unknown field")
        if not _type_ok(value, schema[key]):
            raise ConfigError(f"{where}.{key}: unexpected type {type(value).__name__}")


def _scenario_from_table(table: dict, index: int, base_dir: Path) -> Scenario:
    where = f"scenario[{index}]"
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    top = {k: v for k, v in table.items() if not isinstance(v, dict)}
    sections = {k: v for k, v in table.items() if isinstance(v, dict)}
    _check_table(top, _SCHEMA[None], where)
    if "name" not in top:
        raise ConfigError(f"{where}.name: missing")
    where = f"scenario[{index}] ({top['name']})"
    for key, section in sections.items():
        if key not in _SCHEMA or key is None:
            raise ConfigError(f"{where}.{key}: unknown section")
        _check_table(section, _SCHEMA[key], f"{where}.{key}")
    for key in ("seed", "runs", "workers"):
        if key in top and top[key] < (0 if key == "seed" else 1):
            raise ConfigError(f"{where}.{key}: out of range")

    snap = sections.get("snapshot")
    if snap is None and any(k in sections for k in _NEEDS_SIM + ("sim",)):
        raise ConfigError(f"{where}.snapshot: missing")
    if snap is not None:
        if ("path" in snap) == ("synthetic" in snap):
            raise ConfigError(f"{where}.snapshot: give exactly one of path or synthetic")
        if "path" in snap:
            path = (base_dir / snap["path"]).resolve()
            if not path.is_file():
                raise ConfigError(f"{where}.snapshot.path: no such file {path}")
            snap = {**snap, "path": str(path)}
        else:
            _check_table(snap["synthetic"], _SYNTHETIC_KEYS, f"{where}.snapshot.synthetic")

    sim = None
    write_events = True
    if "sim" in sections:
        raw = dict(sections["sim"])
        write_events = raw.pop("write_events", True)
        try:
            sim = SimConfig(**raw)
        except ConfigError as exc:
            raise ConfigError(f"{where}.sim: {exc}") from None
    for key in _NEEDS_SIM:
        if key in sections and sim is None:
            raise ConfigError(f"{where}.{key}: needs a sim section")

    disc = sections.get("discovery")
    if disc is not None:
        taus = disc.get("taus", list(DEFAULT_TAUS))
        if not taus or any(isinstance(t, bool) or not isinstance(t, _NUM) or t <= 0 for t in taus):
            raise ConfigError(f"{where}.discovery.taus: need positive numbers")
        if disc.get("coverage", "generic") not in COVERAGES:
            raise ConfigError(f"{where}.discovery.coverage: one of {COVERAGES}")
    budget = sections.get("budget")
    if budget is not None:
        n_values = budget.get("n_values")
        if not n_values or any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in n_values):
            raise ConfigError(f"{where}.budget.n_values: need positive integers")
        if any(b < a for a, b in zip(n_values, n_values[1:])):
            raise ConfigError(f"{where}.budget.n_values: must be nondecreasing")
        if any(c not in COVERAGES for c in budget.get("coverages", COVERAGES)):
            raise ConfigError(f"{where}.budget.coverages: each one of {COVERAGES}")
    probe = sections.get("probe")
    if probe is not None:
        lp = probe.get("liquidity_price")
        if lp is not None and (len(lp) != 2 or not all(isinstance(x, _NUM) for x in lp)):
            raise ConfigError(f"{where}.probe.liquidity_price: expected [cost_btc, capacity_btc]")
        if probe.get("snapshots", 0) and sim is None:
            raise ConfigError(f"{where}.probe.snapshots: needs a sim section")
    chain = sections.get("chain")
    if chain is not None:
        if ("dataset" in chain) == ("corpus" in chain):
            raise ConfigError(f"{where}.chain: give exactly one of dataset or corpus")
        if "corpus" in chain:
            _check_table(chain["corpus"], _CORPUS_KEYS, f"{where}.chain.corpus")
        for key in ("dataset", "public_channels"):
            if key in chain:
                path = (base_dir / chain[key]).resolve()
                if not path.is_file():
                    raise ConfigError(f"{where}.chain.{key}: no such file {path}")
                chain[key] = str(path)
        if "dataset" in chain and "public_channels" not in chain:
            raise ConfigError(f"{where}.chain.public_channels: required with a dataset")
        window = chain.get("window")
        if window is not None and (len(window) != 2 or window[0] > window[1]):
            raise ConfigError(f"{where}.chain.window: expected [first_block, last_block]")

    return Scenario(
        name=top["name"], seed=top.get("seed", 0), runs=top.get("runs", 1),
        workers=top.get("workers", 1), output_dir=top.get("output_dir", ""),
        description=top.get("description", ""), snapshot=snap, sim=sim,
        write_events=write_events,
        sections={k: v for k, v in sections.items() if k in ANALYSES}, base_dir=base_dir,
    )


def load_config(path) -> list[Scenario]:
    """Parse and validate a scenario file; raises :class:`ConfigError` with the offending field."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(data) - {"scenario"}
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {sorted(unknown)}")
    tables = data.get("scenario", [])
    if not isinstance(tables, list):
        raise ConfigError(f"{path}: 'scenario' must be an array of tables ([[scenario]])")
    scenarios = [_scenario_from_table(t, i, path.parent) for i, t in enumerate(tables)]
    names = [s.output_dir for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: scenarios share an output directory")
    return scenarios


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("lnprivacy") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir() if p.name.endswith(".toml")}


def resolve_config(spec: str) -> Path:
    """A path to a scenario file, or the name of a bundled scenario."""
    path = Path(spec)
    if path.exists():
        return path
    bundled = bundled_scenarios()
    if spec in bundled:
        return bundled[spec]
    raise ConfigError(f"{spec}: neither a file nor a bundled scenario ({', '.join(sorted(bundled))})")


# ---------------------------------------------------------------- running

class ScenarioFailed(LNPrivacyError):
    """A stage raised after some outputs were written; see ``errors.json``."""


def build_graph(snapshot: dict, seed: int):
    if "path" in snapshot:
        graph = load_snapshot(snapshot["path"])
    else:
        graph = synthetic_snapshot(**snapshot["synthetic"])
    balances = snapshot.get("balances", "uniform")
    if isinstance(balances, list):
        balances = tuple(balances)
    graph = assign_balances(graph, balances, seed=snapshot.get("balances_seed", derive_seed(seed, 0, 1)))
    clients = snapshot.get("clients", (292, 54, 24))
    return assign_attributes(graph, clients, seed=snapshot.get("attributes_seed", derive_seed(seed, 0, 2)))


def _simulate(args):
    graph, config = args
    return run_simulation(graph, config)


def sim_seed(scenario: Scenario, run: int) -> int:
    return derive_seed(scenario.seed, run + 1, 0)


def failure_seed(scenario: Scenario, run: int) -> int:
    return derive_seed(scenario.seed, run + 1, 1)


def simulate_runs(graph, scenario: Scenario, workers: int | None = None) -> list:
    configs = [SimConfig(**{**asdict_shallow(scenario.sim), "seed": sim_seed(scenario, i)})
               for i in range(scenario.runs)]
    workers = scenario.workers if workers is None else workers
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_simulate, [(graph, c) for c in configs]))
    return [run_simulation(graph, c) for c in configs]


def asdict_shallow(obj) -> dict:
    return {f: getattr(obj, f) for f in obj.__dataclass_fields__}


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _clean(x):
    """JSON-safe value: NaN becomes null."""
    if isinstance(x, float) and math.isnan(x):
        return None
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


class _Run:
    def __init__(self, scenario: Scenario, out: Path, workers: int | None):
        self.sc = scenario
        self.out = out
        self.workers = workers
        self.written: list[str] = []
        self.metrics: dict = {}
        self.graph = None
        self.logs: list = []

    def path(self, name: str) -> Path:
        self.written.append(name)
        return self.out / name

    def stage_graph(self):
        if self.sc.snapshot is not None:
            self.graph = build_graph(self.sc.snapshot, self.sc.seed)
            self.metrics["snapshot"] = {"nodes": len(self.graph.nodes),
                                        "channels": len(self.graph.channels)}

    def stage_sim(self):
        if self.sc.sim is None:
            return
        self.logs = simulate_runs(self.graph, self.sc, self.workers)
        if self.sc.write_events:
            for i, log in enumerate(self.logs):
                write_event_log(log, self.path(f"events_run{i}.csv"))
        n = sum(len(log) for log in self.logs)
        ok = sum(e.succeeded for log in self.logs for e in log)
        self.metrics["sim"] = {"payments": n, "success_rate": ok / n if n else None,
                               "runs": len(self.logs)}

    def stage_onpath(self, cfg: dict):
        events = [e for log in self.logs for e in log]
        lengths_s = observed_lengths(events, "success")
        lengths_f = observed_lengths(events, "fail")
        success = LengthDistribution.from_lengths(lengths_s, "success")
        try:
            fail = LengthDistribution.from_lengths(lengths_f, "fail")
        except EmptyLogError:
            fail = None
        raw_s = _histogram(lengths_s)
        raw_f = _histogram(lengths_f)
        rows = [[l, raw_s.get(l, 0.0), raw_f.get(l, 0.0)] for l in sorted(set(raw_s) | set(raw_f))]
        _write_rows(self.path("lengths.csv"), ["length", "success", "fail"], rows)
        results = result_rows(self.sc.name, success, fail)
        write_results(results, self.path("onpath.csv"))
        m = {"length_distribution": {"success": raw_s, "fail": raw_f},
             "single_intermediate_share": raw_s.get(3, 0.0),
             "probabilities": {f"{t}/{o}/{mode}": p for _, t, o, mode, p in results}}
        if cfg.get("empirical_check", False):
            acc_s, acc_r = empirical_adversary_check(events, seed=derive_seed(self.sc.seed, 0, 3))
            m["empirical_accuracy"] = {"sender": acc_s, "recipient": acc_r}
        self.metrics["onpath"] = m

    def stage_throughput(self, cfg: dict):
        reports = [throughput_report(log, self.graph) for log in self.logs]
        rows, out = [], {}
        for bucket in reports[0]:
            nodes = reports[0][bucket]["nodes"]
            forwards = sum(r[bucket]["forwards"] for r in reports) / len(reports)
            mean = sum(r[bucket]["mean_per_day"] for r in reports) / len(reports)
            rows.append([bucket, nodes, forwards, mean])
            out[bucket] = {"nodes": nodes, "forwards": forwards, "mean_per_day": mean}
        _write_rows(self.path("throughput.csv"), ["bucket", "nodes", "forwards", "mean_per_day"], rows)
        self.metrics["throughput"] = out

    def _attacker(self, cfg: dict):
        n = cfg.get("top_n")
        if n is None:
            return None
        return top_degree_nodes(self.graph, n)

    def stage_discovery(self, cfg: dict):
        taus = cfg.get("taus", list(DEFAULT_TAUS))
        kwargs = dict(attacker_connected=self._attacker(cfg),
                      coverage=cfg.get("coverage", "generic"),
                      failure_probability=cfg.get("failure_probability", 0.05),
                      slack_sat=cfg.get("slack_sat", 1), threshold_sat=cfg.get("threshold_sat", 2),
                      gap_filter=cfg.get("gap_filter", True))
        seeds = [failure_seed(self.sc, i) for i in range(len(self.logs))]
        rows = tau_sweep(self.graph, self.logs, taus, seeds=seeds, **kwargs)
        header = EVAL_FIELDS + ["precision_ci_low", "precision_ci_high", "precision_raw"]
        _write_rows(self.path("discovery.csv"), header, [[r[k] for k in header] for r in rows])
        if cfg.get("keep_inferred", False):
            for tau in taus:
                res = run_discovery(self.graph, self.logs[0], tau, seed=seeds[0], keep_inferred=True,
                                    **kwargs)
                write_inferred(res.inferred, self.path(f"inferred_tau{tau:g}.csv"))
        self.metrics["discovery"] = {f"{r['tau_s']:g}": {k: r[k] for k in header[1:] + ["recall_runs"]}
                                     for r in rows}

    def stage_budget(self, cfg: dict):
        seeds = [failure_seed(self.sc, i) for i in range(len(self.logs))]
        rows = []
        for coverage in cfg.get("coverages", list(COVERAGES)):
            rows += recall_vs_budget(self.graph, self.logs, cfg["n_values"], coverage,
                                     tau_s=cfg.get("tau_s", 30.0), seeds=seeds,
                                     failure_probability=cfg.get("failure_probability", 0.05),
                                     gap_filter=cfg.get("gap_filter", True))
        header = ["n", "coverage", "recall", "ci_low", "ci_high"]
        _write_rows(self.path("budget.csv"), header, [[r[k] for k in header] for r in rows])
        self.metrics["budget"] = [{k: r[k] for k in header} for r in rows]

    def stage_probe(self, cfg: dict):
        lp = cfg.get("liquidity_price")
        report = attack_cost(self.graph, cfg.get("channels_to_open"), cfg.get("per_channel_capacity"),
                             None if lp is None else tuple(lp),
                             open_close_fee=cfg.get("open_close_fee", 0.00043),
                             reserve_fraction=cfg.get("reserve_fraction", 0.01))
        fields = list(asdict(report))
        _write_rows(self.path("cost.csv"), fields, [[getattr(report, f) for f in fields]])
        self.metrics["cost"] = asdict(report)
        n_snap = cfg.get("snapshots", 0)
        if n_snap and self.logs:
            tau_ms = cfg.get("tau_s", 30.0) * 1000.0
            attacker = self._attacker(cfg)
            connected = list(self.graph.nodes) if attacker is None else attacker
            snaps = []
            for k in range(n_snap):
                t = int(round(k * tau_ms))
                state = replay(self.graph, self.logs[0], until=t)
                snaps.append(snapshot_network(state, connected, cfg.get("coverage", "generic"),
                                              cfg.get("failure_probability", 0.05),
                                              seed=[failure_seed(self.sc, 0), t], time=t))
            write_snapshots(snaps, self.path("snapshots.csv"))

    def stage_chain(self, cfg: dict):
        window = tuple(cfg["window"]) if "window" in cfg else None
        truth = None
        if "corpus" in cfg:
            params = dict(cfg["corpus"])
            params.setdefault("seed", derive_seed(self.sc.seed, 0, 4))
            dataset, truth = chainmod.generate_corpus(**params)
            window = window or truth.window
            public = truth.public_endpoints
            public_txids = truth.public_txids
            if cfg.get("write_corpus", False):
                chainmod.write_jsonl(dataset, self.path("corpus.jsonl"))
        else:
            dataset = chainmod.load_jsonl(cfg["dataset"])
            public, public_txids = _read_public_channels(cfg["public_channels"])
        candidates = chainmod.match_open_close(dataset, window, public_txids)
        seeds = sorted(t for t in public_txids if t in dataset)
        traced = chainmod.trace_peeling_chains(dataset, seeds, window)
        attribution = chainmod.cluster_and_identify(traced, public, dataset, window)
        by_open = {l.open_txid: l for l in attribution.links}
        for link in candidates:
            found = by_open.get(link.open_txid)
            if found is not None:
                link.cluster_id, link.participants = found.cluster_id, found.participants
        chainmod.write_links(candidates, self.path("links.csv"))
        m = {"private_candidates": len(candidates),
             "closed_candidates": sum(1 for l in candidates if l.close_txid),
             "chains": len(traced.chains), "new_opens": len(traced.new_opens),
             "attribution": attribution.counts()}
        if truth is not None:
            m["corpus"] = corpus_scores(dataset, truth, traced, attribution)
        self.metrics["chain"] = m


def corpus_scores(dataset, truth, traced, attribution) -> dict:
    """Heuristic performance against the corpus generator's ground truth."""
    opens = {t.txid for t in dataset if chainmod.classify_opening(t, truth.window, dataset)}
    closes = {t.txid for t in dataset if chainmod.classify_closing(t)}
    planted_opens = truth.private_opens | truth.public_opens
    chains = [set(c) for c in traced.chains]
    recovered = sum(1 for c in truth.chains if c in chains)
    merges = sum(1 for c in chains if sum(1 for p in truth.chains if c & p) > 1)
    return {
        "opening_recall": len(planted_opens & opens) / len(planted_opens),
        "closing_recall": len(truth.closes & closes) / len(truth.closes) if truth.closes else 1.0,
        "decoys_accepted": sum(1 for d in truth.decoys if d in opens or d in closes),
        "extra_opens": len(opens - planted_opens), "extra_closes": len(closes - truth.closes),
        "chains_planted": len(truth.chains), "chains_recovered": recovered,
        "cross_chain_merges": merges,
        "attribution_expected": truth.expected_counts,
    }


def _histogram(lengths) -> dict[int, float]:
    counts: dict[int, int] = {}
    for x in lengths:
        counts[x] = counts.get(x, 0) + 1
    total = sum(counts.values())
    return {x: counts[x] / total for x in sorted(counts)} if total else {}


def _read_public_channels(path):
    endpoints, txids = {}, set()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            endpoints[row["open_txid"]] = (row["node1"], row["node2"])
            txids.add(row["open_txid"])
            if row.get("close_txid"):
                txids.add(row["close_txid"])
    return endpoints, txids


def run_scenario(scenario: Scenario, output_root, workers: int | None = None) -> dict:
    """Run one scenario; returns its summary (also written to ``summary.json``).

    If a stage raises, ``errors.json`` records the stage, the error and the
    files already written, and :class:`ScenarioFailed` is raised.
    """
    out = Path(output_root) / scenario.output_dir
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(scenario, out, workers)
    stages = [("snapshot", run.stage_graph, None), ("sim", run.stage_sim, None)]
    stages += [(name, getattr(run, f"stage_{name}"), scenario.sections[name])
               for name in ANALYSES if name in scenario.sections]
    for name, fn, cfg in stages:
        try:
            fn() if cfg is None else fn(cfg)
        except Exception as exc:
            manifest = {"scenario": scenario.name, "stage": name, "error": type(exc).__name__,
                        "message": str(exc), "outputs": run.written,
                        "traceback": traceback.format_exc().splitlines()}
            (out / "errors.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
            raise ScenarioFailed(f"{scenario.name}: stage {name} failed: {exc}") from exc
    summary = {"scenario": scenario.name, "seed": scenario.seed, "runs": scenario.runs,
               "outputs": run.written + ["summary.json"], "metrics": _clean(run.metrics)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    return summary
