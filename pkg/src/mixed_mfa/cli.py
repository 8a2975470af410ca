"""Argparse-based command-line interface for mixed-mfa.

Invoked via the console script `mixed-mfa` or as a module with
`python -m mixed_mfa`.
"""

from __future__ import annotations

import argparse
from typing import Any

from . import __version__
from . import runtime as rt
from .errors import ConfigError, MixedMFAError
from .runtime import log, set_config


def _compute_version() -> str:
    """Return a version string, optionally with git metadata if available."""
    base = f"mixed-mfa {__version__}"
    try:
        import os
        import subprocess

        git_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", ".git"))
        if not os.path.isdir(git_dir):
            return base
        sha = (
            subprocess.check_output(
                ["git", "rev-parse", "--short", "HEAD"], stderr=subprocess.DEVNULL
            )
            .decode()
            .strip()
        )
        return f"{base} (git {sha})"
    except Exception:
        return base


def build_parser() -> argparse.ArgumentParser:
    """Create and return the CLI argument parser."""
    p = argparse.ArgumentParser(
        prog="mixed-mfa",
        add_help=True,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Mixed multifractal analysis of vector-valued self-similar measures.",
    )
    p.add_argument(
        "-V",
        "--version",
        action="version",
        version=_compute_version(),
        help="Show version and exit",
    )
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    run = sub.add_parser(
        "run",
        help="Run the job described by a config file",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    run.add_argument("config", help="Job config file (.toml/.yaml/.yml/.json)")
    run.add_argument(
        "-j",
        "--threads",
        type=int,
        help="Worker threads for spectrum grid points and per-point density work (default: 1)",
    )
    run.add_argument("-o", "--output-dir", dest="output_dir", help="Directory for result files")
    run.add_argument("-s", "--seed", type=int, help="Seed for sampled support points")
    run.add_argument(
        "-f",
        "--format",
        choices=["csv", "json"],
        help="Table format for result files (default: csv)",
    )
    run.add_argument(
        "-L",
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Standard logging level threshold (default: INFO)",
    )
    run.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        help="Set log level to ERROR (overridden by --log-level)",
    )
    run.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Set log level to DEBUG (overridden by --log-level)",
    )
    run.add_argument(
        "-J",
        "--log-json",
        action="store_true",
        help="Emit logs as JSON lines (ts, level, message)",
    )
    run.add_argument(
        "-LF",
        "--log-file",
        help="Append logs to a file (1MB simple rotation)",
    )
    run.add_argument(
        "-n",
        "--dry-run",
        action="store_true",
        help="Validate the config and log the planned job; compute and write nothing",
    )
    run.add_argument(
        "-p",
        "--progress",
        action="store_true",
        help="Log progress while a job runs",
    )
    return p


def _pick(flag: Any, cfg: dict[str, Any], key: str) -> Any:
    """CLI flag wins over the config key; ``None`` leaves the runtime default."""
    if flag not in (None, False):
        return flag
    return cfg.get(key)


def main(argv: list[str] | None = None) -> int:
    """CLI entry point; returns a conventional exit code."""
    parser = build_parser()
    ns = parser.parse_args(argv if argv is not None else None)
    if ns.command != "run":
        parser.print_usage()
        log("[USAGE] mixed-mfa run CONFIG [options]")
        return 2

    from .config import JobConfig, load_config_file
    from .jobs import run_job

    if ns.quiet or ns.verbose:
        set_config(log_level="ERROR" if ns.quiet else "DEBUG")
    if ns.log_level:
        set_config(log_level=ns.log_level)
    try:
        data = load_config_file(ns.config)
        level = ns.log_level or (
            "ERROR" if ns.quiet else "DEBUG" if ns.verbose else data.get("log_level")
        )
        set_config(
            log_level=str(level).upper() if level else None,
            log_json=_pick(ns.log_json, data, "log_json"),
            log_file=_pick(ns.log_file, data, "log_file"),
            threads=_pick(ns.threads, data, "threads"),
            output_format=_pick(ns.format, data, "format"),
            dry_run=_pick(ns.dry_run, data, "dry_run"),
            progress=_pick(ns.progress, data, "progress"),
            seed=_pick(ns.seed, data, "seed"),
        )
        seed = ns.seed if ns.seed is not None else data.get("seed", rt.SEED)
        cfg = JobConfig.from_mapping(data, overrides={"seed": seed, "output": ns.output_dir})
        return run_job(cfg)
    except ConfigError as e:
        log(f"[ERROR] config: {e}", level="ERROR")
        return e.exit_code
    except MixedMFAError as e:
        log(f"[ERROR] {type(e).__name__}: {e}", level="ERROR")
        return e.exit_code
    except Exception as e:  # pragma: no cover - safety
        log(f"[CRASH] {e!r}", level="CRITICAL")
        return 10


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
