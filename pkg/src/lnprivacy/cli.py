"""Command-line entry point: ``lnprivacy run|validate|list-scenarios|generate-snapshot``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .exceptions import ConfigError, LNPrivacyError
from .experiments import ScenarioFailed, bundled_scenarios, load_config, resolve_config, run_scenario
from .graph import dump_snapshot
from .synthetic import synthetic_snapshot

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
OUTPUT_ENV = "LNPRIVACY_OUTPUT_ROOT"
DEFAULT_OUTPUT = "lnprivacy-output"

log = logging.getLogger("lnprivacy")


def output_root(flag: str | None) -> Path:
    """``--output-root`` wins over the environment variable, which wins over the default."""
    return Path(flag or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def cmd_run(args) -> int:
    scenarios = load_config(resolve_config(args.config))
    root = output_root(args.output_root)
    status = EXIT_OK
    for sc in scenarios:
        log.info("running %s -> %s", sc.name, root / sc.output_dir)
        try:
            summary = run_scenario(sc, root, workers=args.workers)
        except ScenarioFailed as exc:
            print(f"error: {exc} (see {root / sc.output_dir / 'errors.json'})", file=sys.stderr)
            status = EXIT_RUNTIME
            continue
        print(f"{sc.name}: wrote {len(summary['outputs'])} files to {root / sc.output_dir}")
    return status


def cmd_validate(args) -> int:
    scenarios = load_config(resolve_config(args.config))
    for sc in scenarios:
        stages = ["snapshot"] * (sc.snapshot is not None) + ["sim"] * (sc.sim is not None) + list(sc.sections)
        print(f"{sc.name}: ok ({', '.join(stages) or 'nothing to do'})")
    if not scenarios:
        print("no scenarios")
    return EXIT_OK


def cmd_list(args) -> int:
    for name, path in sorted(bundled_scenarios().items()):
        scenarios = load_config(path)
        desc = scenarios[0].description if scenarios else ""
        print(f"{name:24s} {desc}")
    return EXIT_OK


def cmd_generate(args) -> int:
    graph = synthetic_snapshot(args.nodes, mean_degree=args.mean_degree, exponent=args.exponent,
                               max_degree=args.max_degree, private_fraction=args.private_fraction,
                               seed=args.seed)
    dump_snapshot(graph, args.out)
    print(json.dumps({"nodes": len(graph.nodes), "channels": len(graph.channels), "path": str(args.out)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lnprivacy", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the scenarios in a config file (or a bundled scenario)")
    run.add_argument("config")
    run.add_argument("--output-root", help=f"output directory root (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    run.add_argument("--workers", type=int, help="parallel simulation runs (overrides the config)")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)

    lst = sub.add_parser("list-scenarios", help="list bundled scenarios")
    lst.set_defaults(func=cmd_list)

    gen = sub.add_parser("generate-snapshot", help="write a synthetic snapshot JSON")
    gen.add_argument("--nodes", type=int, default=300)
    gen.add_argument("--mean-degree", type=float, default=6.0)
    gen.add_argument("--exponent", type=float, default=2.1)
    gen.add_argument("--max-degree", type=int)
    gen.add_argument("--private-fraction", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, type=Path)
    gen.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LNPrivacyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
