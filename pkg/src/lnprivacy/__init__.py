"""Lightning Network privacy simulator and attack toolkit."""

from .chain import (Dataset, PropertyHeuristic, TransactionRecord, classify_closing,
                    classify_opening, cluster_and_identify, generate_corpus, load_jsonl,
                    match_open_close, trace_peeling_chains)
from .discovery import (PaymentDiscovery, decompose_payments, diff_snapshots, evaluate,
                        recall_vs_budget, run_discovery, tau_sweep)
from .exceptions import (ConfigError, DatasetError, DistributionError, DuplicateChannelError,
                         EmptyLogError, LNPrivacyError, SnapshotError)
from .graph import (CLIENTS, Channel, FeePolicy, Hop, LatencyTable, NetworkGraph, NodeAttributes,
                    assign_attributes, assign_balances, dump_snapshot, load_snapshot)
from .onpath import (LengthDistribution, empirical_adversary_check, infer,
                     recipient_probabilities, sender_fail_probability, sender_success_probability)
from .pathfind import Path, Router, WeightParams, edge_weight, find_path, hop_fee, k_shortest_paths
from .probe import (CostReport, ProbeOracle, Snapshot, attack_cost, probe_balance,
                    snapshot_network)
from .sim import (EventLog, PaymentEvent, SimConfig, execute_payment, path_length_distribution,
                  run_simulation, throughput_report)
from .synthetic import synthetic_snapshot

__version__ = "0.1.0"

__all__ = [
    "CLIENTS", "Channel", "ConfigError", "CostReport", "Dataset", "DatasetError",
    "DistributionError", "DuplicateChannelError", "EmptyLogError", "EventLog", "FeePolicy", "Hop",
    "LNPrivacyError", "LatencyTable", "LengthDistribution", "NetworkGraph", "NodeAttributes",
    "Path", "PaymentDiscovery", "PaymentEvent", "ProbeOracle", "PropertyHeuristic", "Router",
    "SimConfig", "Snapshot", "SnapshotError", "TransactionRecord", "WeightParams",
    "assign_attributes", "assign_balances", "attack_cost", "classify_closing",
    "classify_opening", "cluster_and_identify", "decompose_payments", "diff_snapshots",
    "dump_snapshot", "edge_weight", "empirical_adversary_check", "evaluate", "execute_payment",
    "find_path", "generate_corpus", "hop_fee", "infer", "k_shortest_paths", "load_jsonl",
    "load_snapshot", "match_open_close", "path_length_distribution", "probe_balance",
    "recall_vs_budget", "recipient_probabilities", "run_discovery", "run_simulation",
    "sender_fail_probability", "sender_success_probability", "snapshot_network",
    "synthetic_snapshot", "tau_sweep", "throughput_report", "trace_peeling_chains",
]
