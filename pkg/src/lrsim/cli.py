"""Command-line driver: ``lrsim <experiment> --config FILE [--out DIR] [--seed N] [--threads K]``."""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import EXPERIMENTS, U64_MAX, ConfigError, ExperimentConfig, run_experiment, validate_config
from .gates import InfeasibleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _threads(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("LRSIM_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError:
            raise ConfigError([f"LRSIM_THREADS must be a positive integer, got {env!r}"]) from None
        if k < 1:
            raise ConfigError([f"LRSIM_THREADS must be a positive integer, got {env!r}"])
        return k
    return 1


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrsim", description="Run a seeded experiment and write CSV tables plus a JSON manifest.")
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", required=True, help="YAML or JSON parameter file")
    p.add_argument("--out", default=None, help="output directory (default: ./lrsim-out/<experiment>)")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: LRSIM_THREADS or 1)")
    return p


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError([f"cannot read config {args.config!r}: {exc.strerror}"]) from exc
        config = validate_config(text, args.experiment)
        if args.seed is not None:
            if not 0 <= args.seed <= U64_MAX:
                raise ConfigError([f"--seed must be an unsigned 64-bit integer, got {args.seed}"])
            config.seed = args.seed
        if args.threads is not None and args.threads < 1:
            raise ConfigError(["--threads must be at least 1"])
        threads = _threads(args.threads)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or config.output or Path("lrsim-out") / config.experiment)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    try:
        result = run_experiment(config, threads)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        _write_manifest(out, config, threads, time.perf_counter() - started, {}, {"infeasible": str(exc)})
        return EXIT_INFEASIBLE
    files = {}
    for name, table in result.tables.items():
        path = out / f"{name}.csv"
        write_csv(path, table.columns, table.rows)
        files[name] = path.name
    _write_manifest(out, config, threads, time.perf_counter() - started, files, result.manifest)
    print(f"wrote {len(files)} table(s) to {out}")
    return EXIT_OK


def _write_manifest(out: Path, config: ExperimentConfig, threads: int, wall: float, files: dict, extra: dict) -> None:
    manifest = {
        "experiment": config.experiment,
        "seed": config.seed,
        "params": config.params,
        "defaults_used": config.defaults_used,
        "threads": threads,
        "wall_time_s": wall,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "tables": files,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
