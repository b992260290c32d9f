"""Command-line entry point.

    pct run <config.json> [--out DIR] [--seed N] [--jobs K]
    pct validate <config.json>
    pct report <DIR...> [--out FILE]

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or usage.
``PCT_THREADS`` caps the BLAS/OpenMP thread pools used inside one run.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from pathlib import Path

from threadpoolctl import threadpool_limits

from pct.config import load_config
from pct.errors import ConfigError
from pct.reporting import merge_results, results_text, write_results

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _threads() -> int | None:
    raw = os.environ.get("PCT_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError("PCT_THREADS", f"must be a positive integer, got {raw!r}")
    return n


def _overrides(args) -> dict:
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        over["output_dir"] = str(args.out)
    return over


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, _overrides(args))
        threads = _threads()
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from pct.experiments import run_experiment

    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.json").write_text(cfg.to_json(), encoding="utf-8", newline="")
        with threadpool_limits(limits=threads):
            rows = run_experiment(cfg, out, args.jobs)
        write_results(rows, out / "results.csv")
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        if os.environ.get("PCT_DEBUG"):
            traceback.print_exc()
        return EXIT_RUNTIME
    for r in rows:
        meta = r.meta_text()
        se = f" +- {r.stderr:.4g}" if r.stderr is not None else ""
        print(f"{r.metric:24s} {r.value:.6g}{se}" + (f"  [{meta}]" if meta else ""))
    print(f"wrote {out / 'results.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {cfg.experiment} (seed {cfg.seed}, output_dir {cfg.output_dir})")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rows = merge_results(args.dirs)
    except (OSError, ValueError) as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = results_text(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pct", description="Perception-coherence transfer experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--seed", type=int, help="override the run seed")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for sweep experiments")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("report", help="merge results.csv files from run directories")
    m.add_argument("dirs", nargs="+")
    m.add_argument("--out", help="write the merged table here instead of stdout")
    m.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
