"""Command line: ``catpulse run|validate --config PATH [--out DIR] [--threads N]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (the
record is still written, with ``status = "failed"`` and diagnostics).
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import CatpulseError, ConfigError, IntegrationError, OptimizationError
from .experiments import config_warnings, library_version, run_experiment, write_json

THREADS_ENV = "CATPULSE_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def resolve_threads(cli_value: int | None) -> int:
    """--threads, else $CATPULSE_THREADS, else 1."""
    if cli_value is not None:
        n = cli_value
    else:
        raw = os.environ.get(THREADS_ENV)
        if raw is None or raw.strip() == "":
            return 1
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="catpulse", description="Cat-state generation experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {library_version()}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write record.json plus CSV data")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (default: [output] dir, else ./catpulse-out)")
    run.add_argument("--threads", type=int, default=None, help=f"worker threads (overrides ${THREADS_ENV})")
    val = sub.add_parser("validate", help="parse a config and report physics warnings without running")
    val.add_argument("--config", required=True)
    return ap


def _failure_record(cfg, exc: CatpulseError) -> dict:
    diag = getattr(exc, "diagnostics", None) or {}
    rec = {"kind": cfg.kind, "version": library_version(), "config": cfg.source, "status": "failed",
           "error": {"type": type(exc).__name__, "message": str(exc)}, "diagnostics": diag}
    if isinstance(exc, OptimizationError):
        rec["error"]["kappa_ex"] = exc.kappa_ex
        cause = exc.__cause__
        if isinstance(cause, IntegrationError):
            rec["diagnostics"] = cause.diagnostics or {}
    return rec


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
        msgs = config_warnings(cfg)
    except CatpulseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for m in msgs:
        print(f"warning: {m}")
    print(f"{args.config}: valid {cfg.kind} config, {len(msgs)} warning(s)")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        threads = resolve_threads(args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output.get("dir") or "catpulse-out"
    try:
        record = run_experiment(cfg, out, threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CatpulseError as exc:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "record.json"), _failure_record(cfg, exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for m in record["warnings"]:
        print(f"warning: {m}")
    print(f"wrote {os.path.join(out, 'record.json')}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
