"""Result files: CSV tables and JSON documents with a provenance header.

Bodies carry no timestamps, so the same config and seed give byte-identical
files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import __version__
from .errors import ConfigError

TOOL = "mixed-mfa"


def header_block(
    job: str, digest: str, seed: int | None, notes: Iterable[str] = ()
) -> dict[str, Any]:
    head: dict[str, Any] = {
        "tool": TOOL,
        "version": __version__,
        "job": job,
        "config_sha256": digest,
        "seed": seed,
    }
    notes = list(notes)
    if notes:
        head["notes"] = notes
    return head


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    if v is None:
        return ""
    return str(v)


def jsonable(v: Any) -> Any:
    """Replace non-finite floats by strings and tuples by lists, recursively."""
    if isinstance(v, float) and not math.isfinite(v):
        return format_value(v)
    if isinstance(v, Mapping):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    return v


def resolve_output(out_dir: str | Path, name: str) -> Path:
    """Resolve ``name`` inside ``out_dir``; refuse paths that escape it."""
    root = Path(out_dir).resolve()
    path = (root / name).resolve()
    if path != root and root not in path.parents:
        raise ConfigError(f"{name!r} resolves outside {root}", field="output")
    return path


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def render_csv(
    header: Mapping[str, Any], columns: Sequence[str], rows: Iterable[Mapping[str, Any]]
) -> str:
    buf = io.StringIO()
    for k, v in header.items():
        value = ";".join(v) if isinstance(v, list) else format_value(v)
        buf.write(f"# {k}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(header: Mapping[str, Any], body: Any) -> str:
    doc = {"header": jsonable(header), "body": jsonable(body)}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_table(
    out_dir: str | Path,
    stem: str,
    columns: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
    header: Mapping[str, Any],
    fmt: str = "csv",
) -> Path:
    """Write ``rows`` as ``<stem>.csv`` (or ``<stem>.json`` with ``fmt="json"``)."""
    if fmt == "json":
        body = [{c: r.get(c) for c in columns} for r in rows]
        return _write(resolve_output(out_dir, f"{stem}.json"), render_json(header, body))
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}", field="format")
    return _write(resolve_output(out_dir, f"{stem}.csv"), render_csv(header, columns, rows))


def write_document(out_dir: str | Path, name: str, body: Any, header: Mapping[str, Any]) -> Path:
    return _write(resolve_output(out_dir, name), render_json(header, body))
