"""Command-line entry point: ``sobolrisk {fit,quality,risk-sweep,selfcheck}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure. Failures
print a one-line JSON record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from sobolrisk import experiments, selfcheck
from sobolrisk.config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sobolrisk", description="Sobol indices from orthonormal metamodels with error and risk bounds.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("fit", "fit a metamodel and write its indices"),
        ("quality", "proposed and bootstrap error bounds per subset"),
        ("risk-sweep", "empirical risk against the theoretical bounds"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="YAML experiment config")
        s.add_argument("--out", help="output directory (overrides the config)")
        s.add_argument("--seed", type=int, help="master seed (overrides the config)")
        s.add_argument("--jobs", type=int, default=1, help="worker processes")
    sub.add_parser("selfcheck", help="run the fast invariant checks")
    return p


def _fail(code: int, kind: str, exc: Exception) -> int:
    print(json.dumps({"status": "error", "kind": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "selfcheck":
        return EXIT_OK if selfcheck.run_all() else 1
    if args.jobs < 1:
        return _fail(EXIT_CONFIG, "config", ValueError("--jobs must be positive"))
    try:
        cfg = load_config(args.config, args.seed, args.out)
        experiments.prepare(cfg)
        if args.command == "risk-sweep" and cfg.n_runs < 2:
            raise ConfigError("risk-sweep needs n_runs >= 2")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    log = lambda msg: print(msg, file=sys.stderr)
    try:
        if args.command == "fit":
            summary = experiments.cmd_fit(cfg)
        elif args.command == "quality":
            summary = experiments.cmd_quality(cfg)
        else:
            summary = experiments.cmd_risk_sweep(cfg, args.jobs, log)
        experiments.echo_config(cfg)
    except (experiments.NumericalFailure, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", exc)
    print(json.dumps({"status": "ok", "config_hash": cfg.config_hash(), **summary}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
