"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  Errors are
reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from ..dynamics import NumericalError
from ..gates import GateError
from ..noise import NoiseError
from ..perturbative import FrameError, QuadratureError
from ..sequences import SequenceError
from .config import ConfigError, default_config, load, validate
from .experiments import EXPERIMENTS, SCHEMA_VERSION, Result
from .fitting import FitError

COMMANDS = {"simulate-memory": "memory", "simulate-gate": "gate", "scaling-sweep": "scaling_sweep",
            "tradeoff": "tradeoff", "sequence-info": "sequence_info"}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _format(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def write_csv(path: str, result: Result) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("schema_version",) + tuple(result.columns))
        for row in result.rows:
            w.writerow([SCHEMA_VERSION] + [_format(row[c]) for c in result.columns])


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return _jsonable(v.item())
    return v


def write_json(path: str, kind: str, config, result: Result) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "experiment": kind, "seed": config.seed,
           "trajectories": config.trajectories, "columns": list(result.columns), "rows": result.rows,
           "summary": result.summary}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, sort_keys=True, indent=2)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsecontrol",
                                     description="Pulse-control simulations of qubits under classical noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="configuration file (dotted-key format)")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--trajectories", type=int, help="Monte Carlo trajectories per point")
        p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    return parser


def _error(code: int, category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message, "exit_code": code}, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else _error(EXIT_CONFIG, "config", "invalid command line")
    kind = COMMANDS[args.command]
    try:
        config = load(args.config) if args.config else default_config(kind)
        config = config.set("kind", kind)
        for key in ("seed", "out", "trajectories"):
            if getattr(args, key) is not None:
                config = config.set(key, getattr(args, key))
        validate(config)
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
    except (ConfigError, ValueError) as exc:
        return _error(EXIT_CONFIG, "config", str(exc))

    try:
        result = EXPERIMENTS[kind](config, threads=args.threads)
    except (NumericalError, QuadratureError, FitError, ArithmeticError) as exc:
        return _error(EXIT_NUMERICAL, "numerical", str(exc))
    except (ConfigError, NoiseError, SequenceError, GateError, FrameError) as exc:
        return _error(EXIT_CONFIG, "config", str(exc))

    os.makedirs(config.out, exist_ok=True)
    write_csv(os.path.join(config.out, f"{kind}.csv"), result)
    write_json(os.path.join(config.out, f"{kind}.json"), kind, config, result)
    if result.text:
        sys.stdout.write(result.text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
