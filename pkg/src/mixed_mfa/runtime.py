"""Runtime settings and logging for mixed-mfa.

Settings are module globals seeded from ``MIXED_MFA_*`` environment variables
and overridden in memory by the CLI through :func:`set_config`.
"""

from __future__ import annotations

import contextlib
import json
import os
import re
from datetime import datetime, timezone
from pathlib import Path

_LEVELS = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40, "CRITICAL": 50}
_LOG_LEVEL_NAME = os.environ.get("MIXED_MFA_LOG_LEVEL", "INFO").upper()
LOG_LEVEL = _LEVELS.get(_LOG_LEVEL_NAME, 20)
LOG_JSON = os.environ.get("MIXED_MFA_LOG_JSON", "0") == "1"
LOG_FILE = os.environ.get("MIXED_MFA_LOG_FILE")
THREADS = max(1, int(os.environ.get("MIXED_MFA_THREADS", "1")))
_SEED_ENV = os.environ.get("MIXED_MFA_SEED")
SEED: int | None = int(_SEED_ENV) if _SEED_ENV else None
OUTPUT_DIR = os.environ.get("MIXED_MFA_OUTPUT_DIR")
OUTPUT_FORMAT = os.environ.get("MIXED_MFA_FORMAT", "csv").lower()
DRY_RUN = os.environ.get("MIXED_MFA_DRY_RUN", "0") == "1"
PROGRESS = os.environ.get("MIXED_MFA_PROGRESS", "0") == "1"


def set_config(
    *,
    log_level: str | None = None,
    log_json: bool | None = None,
    log_file: str | None = None,
    threads: int | None = None,
    seed: int | None = None,
    output_dir: str | None = None,
    output_format: str | None = None,
    dry_run: bool | None = None,
    progress: bool | None = None,
) -> None:
    """Override runtime settings in memory; ``None`` leaves a value unchanged."""
    global \
        LOG_LEVEL, \
        LOG_JSON, \
        LOG_FILE, \
        THREADS, \
        SEED, \
        OUTPUT_DIR, \
        OUTPUT_FORMAT, \
        DRY_RUN, \
        PROGRESS
    if log_level is not None:
        lvl = _LEVELS.get(str(log_level).upper())
        if lvl is not None:
            LOG_LEVEL = lvl
    if log_json is not None:
        LOG_JSON = bool(log_json)
    if log_file is not None:
        LOG_FILE = log_file
    if threads is not None:
        THREADS = max(1, int(threads))
    if seed is not None:
        SEED = int(seed)
    if output_dir is not None:
        OUTPUT_DIR = output_dir
    if output_format is not None:
        OUTPUT_FORMAT = str(output_format).lower()
    if dry_run is not None:
        DRY_RUN = bool(dry_run)
    if progress is not None:
        PROGRESS = bool(progress)


LOG_FILE_MAX_BYTES = 1_000_000
_TAG = re.compile(r"^\[(\w+)\s*\]\s*")


def _rotate(path: Path) -> None:
    """Move ``path`` to ``path.1`` once it grows past LOG_FILE_MAX_BYTES."""
    with contextlib.suppress(OSError):
        if path.exists() and path.stat().st_size > LOG_FILE_MAX_BYTES:
            path.replace(path.with_suffix(path.suffix + ".1"))


def _render(msg: str, level: str) -> str:
    if not LOG_JSON:
        return msg
    record = {
        "ts": datetime.now(timezone.utc).isoformat(),
        "level": level,
        "logger": "mixed_mfa",
        "message": msg,
    }
    m = _TAG.match(msg)
    if m:
        record["tag"] = m.group(1).lower()
    return json.dumps(record, ensure_ascii=False)


def log(msg: str, level: str = "INFO") -> None:
    """Print ``msg`` if ``level`` passes LOG_LEVEL.

    Bracket tags such as ``[root ]`` become a ``tag`` field on JSON lines.
    LOG_FILE, when set, receives a copy of every emitted line.
    """
    lvl = str(level).upper()
    if _LEVELS.get(lvl, 20) < LOG_LEVEL:
        return
    out = _render(msg, lvl)
    print(out, flush=True)
    if LOG_FILE:
        p = Path(LOG_FILE)
        _rotate(p)
        with contextlib.suppress(OSError), p.open("a", encoding="utf-8") as fh:
            fh.write(out + "\n")
