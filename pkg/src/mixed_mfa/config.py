"""Configuration file loading and job validation.

Supports TOML (.toml), YAML (.yml/.yaml), and JSON (.json) formats.
Keys are normalized to lowercase with hyphens converted to underscores;
measure names under ``[measures]`` keep their spelling.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence

from .errors import ConfigError, MeasureSpecError, ResourceLimitError
from .measure import (
    MAX_ENUM_BITS,
    SelfSimilarMeasure,
    VectorMeasure,
    max_table_depth,
    measure_from_mapping,
)

JOBS = ("spectrum", "density", "regularity", "verify")
CHECKS = ("billingsley", "density-bounds", "density-level-sets")
RUNTIME_KEYS = (
    "log_level",
    "log_json",
    "log_file",
    "threads",
    "format",
    "dry_run",
    "progress",
)


def _norm_key(key: str) -> str:
    return key.replace("-", "_").lower()


def _normalize(d: dict[str, Any], *, keep_keys: bool = False) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in d.items():
        nk = str(k) if keep_keys else _norm_key(str(k))
        if isinstance(v, dict):
            out[nk] = _normalize(v, keep_keys=(nk == "measures" and not keep_keys))
        else:
            out[nk] = v
    return out


def _parse_error(p: Path, e: Exception) -> ConfigError:
    line = col = None
    if isinstance(e, json.JSONDecodeError):
        line, col = e.lineno, e.colno
    mark = getattr(e, "problem_mark", None)
    if mark is not None:
        line, col = mark.line + 1, mark.column + 1
    if line is not None:
        return ConfigError(f"{p}: line {line}, column {col}: {e}")
    # tomllib puts "(at line L, column C)" in the message itself
    return ConfigError(f"{p}: {e}")


def load_config_file(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    suf = p.suffix.lower()
    text = p.read_text(encoding="utf-8")
    if suf == ".toml":
        import tomllib  # Python 3.11+

        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise _parse_error(p, e) from e
        return _normalize(data)
    if suf in {".yml", ".yaml"}:
        import yaml

        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise _parse_error(p, e) from e
        if not isinstance(data, dict):
            raise ConfigError("YAML config must be a mapping at the top level")
        return _normalize(data)
    if suf == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise _parse_error(p, e) from e
        if not isinstance(data, dict):
            raise ConfigError("JSON config must be an object at the top level")
        return _normalize(data)
    raise ConfigError(f"Unsupported config extension: {suf}")


# -- field parsers ----------------------------------------------------------


def _float(value: Any, fld: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"expected a number, got {value!r}", field=fld) from e
    if not math.isfinite(v):
        raise ConfigError("must be finite", field=fld)
    return v


def _int(value: Any, fld: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ConfigError(f"expected an integer, got {value!r}", field=fld)
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"expected an integer, got {value!r}", field=fld) from e


def _floats(value: Any, fld: str) -> list[float]:
    if isinstance(value, (str, bytes)) or not isinstance(value, Sequence):
        raise ConfigError("expected a list of numbers", field=fld)
    return [_float(v, f"{fld}[{i}]") for i, v in enumerate(value)]


def _depths(value: Any, fld: str, default: Sequence[int], *, minimum: int = 1) -> list[int]:
    """Depths as a list of integers or a ``{min, max}`` range."""
    if value is None:
        return list(default)
    if isinstance(value, Mapping):
        if "min" not in value or "max" not in value:
            raise ConfigError("range needs both min and max", field=fld)
        lo, hi = _int(value["min"], f"{fld}.min"), _int(value["max"], f"{fld}.max")
        out = list(range(lo, hi + 1))
    elif isinstance(value, Sequence) and not isinstance(value, (str, bytes)):
        out = sorted({_int(v, f"{fld}[{i}]") for i, v in enumerate(value)})
    else:
        raise ConfigError("expected a list of depths or {min, max}", field=fld)
    if not out:
        raise ConfigError("must not be empty", field=fld)
    if out[0] < minimum:
        raise ConfigError(f"depths must be >= {minimum}", field=fld)
    return out


def _check_depth_cap(depths: Sequence[int], vm: VectorMeasure, fld: str) -> None:
    deepest = max(depths)
    cap = min(int(MAX_ENUM_BITS / math.log2(vm.base_count)), max_table_depth(len(vm.allowed)))
    if deepest > cap:
        raise ResourceLimitError(
            f"{fld}: depth {deepest} exceeds the cell-table cap for this vector measure",
            hint=f"use depths <= {cap}",
        )


def _q_vector(value: Any, fld: str, k: int) -> list[float]:
    if value is None:
        raise ConfigError("missing", field=fld)
    q = [_float(value, fld)] if isinstance(value, (int, float)) else _floats(value, fld)
    if len(q) != k:
        raise ConfigError(f"needs {k} value(s), got {len(q)}", field=fld)
    for v in q:
        if abs(v) > 64.0:
            raise ConfigError("values must lie in [-64, 64]", field=fld)
    return q


def _q_grid(value: Any, fld: str, default: Sequence[float] | None = None) -> list[float]:
    if value is None:
        if default is None:
            raise ConfigError("missing", field=fld)
        return list(default)
    grid = _floats(value, fld)
    if not grid:
        raise ConfigError("must not be empty", field=fld)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("must be strictly increasing", field=fld)
    return grid


def _prefixes(value: Any, fld: str, vm: VectorMeasure) -> list[list[int]]:
    """Cylinder prefixes as digit strings ("01") or digit lists."""
    if value is None:
        return []
    if isinstance(value, (str, bytes)) or not isinstance(value, Sequence):
        raise ConfigError("expected a list of digit words", field=fld)
    out: list[list[int]] = []
    for i, w in enumerate(value):
        digits = [int(ch) for ch in w] if isinstance(w, str) else [_int(d, fld) for d in w]
        if not digits or any(d not in vm.allowed for d in digits):
            raise ConfigError(
                f"word {w!r} is empty or leaves the common support", field=f"{fld}[{i}]"
            )
        out.append(digits)
    return out


def _schedule(value: Any, fld: str) -> dict[str, Any]:
    sched: dict[str, Any] = {"r0": 0.25, "rho": 0.5, "steps": 40}
    if value is None:
        return sched
    if not isinstance(value, Mapping):
        raise ConfigError("expected a table with r0, rho, steps", field=fld)
    if "r0" in value:
        sched["r0"] = _float(value["r0"], f"{fld}.r0")
    if "rho" in value:
        sched["rho"] = _float(value["rho"], f"{fld}.rho")
    if "steps" in value:
        sched["steps"] = _int(value["steps"], f"{fld}.steps")
    if not sched["r0"] > 0 or not 0 < sched["rho"] < 1 or sched["steps"] < 2:
        raise ConfigError("need r0 > 0, 0 < rho < 1, steps >= 2", field=fld)
    return sched


def _measure_name(value: Any, fld: str, measures: Mapping[str, Any]) -> str:
    name = str(value)
    if name not in measures:
        known = ", ".join(sorted(measures)) or "none"
        raise ConfigError(f"unknown measure {name!r} (known: {known})", field=fld)
    return name


# -- job parameters -----------------------------------------------------------


def _spectrum_params(p: Mapping[str, Any], vm: VectorMeasure) -> dict[str, Any]:
    component = _int(p.get("component", 0), "params.component")
    if not 0 <= component < vm.k:
        raise ConfigError(f"must lie in [0, {vm.k - 1}]", field="params.component")
    grid = _q_grid(p.get("q_grid"), "params.q_grid")
    if len(grid) < 3:
        raise ConfigError("needs at least 3 values", field="params.q_grid")
    frozen = _floats(p.get("frozen", [0.0] * (vm.k - 1)), "params.frozen")
    if len(frozen) != vm.k - 1:
        raise ConfigError(f"needs {vm.k - 1} value(s)", field="params.frozen")
    kind = str(p.get("kind", "hausdorff"))
    if kind not in ("hausdorff", "packing", "prepacking"):
        raise ConfigError(f"unknown kind {kind!r}", field="params.kind")
    against = str(p.get("against", "measure"))
    if against not in ("measure", "diameter"):
        raise ConfigError(f"unknown kernel {against!r}", field="params.against")
    return {
        "q_grid": grid,
        "frozen": frozen,
        "component": component,
        "kind": kind,
        "against": against,
        "depths": _depths(p.get("depths"), "params.depths", range(1, 13)),
    }


def _density_params(
    p: Mapping[str, Any], vm: VectorMeasure, measures: Mapping[str, Any]
) -> dict[str, Any]:
    out: dict[str, Any] = {
        "q": _q_vector(p.get("q"), "params.q", vm.k),
        "t": None if p.get("t") is None else _float(p["t"], "params.t"),
        "depths": _depths(p.get("depths"), "params.depths", range(8, 13)),
        "points": _floats(p.get("points", []), "params.points"),
        "samples": _int(p.get("samples", 64), "params.samples"),
        "schedule": _schedule(p.get("schedule"), "params.schedule"),
        "tolerance": _float(p.get("tolerance", 0.05), "params.tolerance"),
        "slack": _float(p.get("slack", 0.05), "params.slack"),
        "theta": None,
        "prefixes": _prefixes(p.get("prefixes"), "params.prefixes", vm),
    }
    if p.get("theta") is not None:
        out["theta"] = _measure_name(p["theta"], "params.theta", measures)
    if out["samples"] < 8:
        raise ConfigError("needs at least 8 sample points", field="params.samples")
    if out["prefixes"] and max(len(w) for w in out["prefixes"]) > out["depths"][0]:
        raise ConfigError("prefixes deeper than the shallowest depth", field="params.prefixes")
    return out


def _regularity_params(p: Mapping[str, Any]) -> dict[str, Any]:
    a = _float(p.get("a", 2.0), "params.a")
    if not a > 1.0:
        raise ConfigError("must be > 1", field="params.a")
    samples = _int(p.get("samples", 256), "params.samples")
    if samples < 64:
        raise ConfigError("needs at least 64 samples", field="params.samples")
    return {
        "depths": _depths(p.get("depths"), "params.depths", range(0, 21), minimum=0),
        "doubling_depths": _depths(
            p.get("doubling_depths"), "params.doubling_depths", range(6, 13)
        ),
        "a": a,
        "samples": samples,
    }


def _verify_params(
    p: Mapping[str, Any], vm: VectorMeasure, measures: Mapping[str, Any]
) -> dict[str, Any]:
    checks = p.get("checks", list(CHECKS))
    if isinstance(checks, str) or not isinstance(checks, Sequence) or not checks:
        raise ConfigError("expected a non-empty list", field="params.checks")
    for c in checks:
        if c not in CHECKS:
            raise ConfigError(
                f"unknown check {c!r} (known: {', '.join(CHECKS)})", field="params.checks"
            )
    out: dict[str, Any] = {
        "checks": [str(c) for c in checks],
        "depths": _depths(p.get("depths"), "params.depths", range(6, 13)),
    }
    if "billingsley" in checks:
        mode = str(p.get("mode", "auto"))
        if mode not in ("auto", "equality", "inequality"):
            raise ConfigError(f"unknown mode {mode!r}", field="params.mode")
        out["mode"] = mode
        out["q_grid"] = _q_grid(p.get("q_grid"), "params.q_grid", [-1.0, 0.0, 1.0, 2.0])
        out["nu"] = _measure_name(p.get("nu", vm.reference.name), "params.nu", measures)
    if "density-bounds" in checks or "density-level-sets" in checks:
        out["q"] = _q_vector(p.get("q"), "params.q", vm.k)
        out["t"] = None if p.get("t") is None else _float(p["t"], "params.t")
        out["samples"] = _int(p.get("samples", 256), "params.samples")
        out["tolerance"] = _float(p.get("tolerance", 0.05), "params.tolerance")
        out["schedule"] = _schedule(p.get("schedule"), "params.schedule")
        out["theta"] = (
            _measure_name(p["theta"], "params.theta", measures)
            if p.get("theta") is not None
            else None
        )
        if out["samples"] < 8:
            raise ConfigError("needs at least 8 sample points", field="params.samples")
    return out


@dataclass(frozen=True)
class JobConfig:
    """A validated job: measures, the vector under study, job name and parameters."""

    job: str
    measures: dict[str, SelfSimilarMeasure]
    vector: VectorMeasure
    params: dict[str, Any]
    seed: int | None = None
    output: str | None = None
    runtime: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(
        cls, data: Mapping[str, Any], *, overrides: Mapping[str, Any] | None = None
    ) -> "JobConfig":
        """Validate a normalized config mapping; ``overrides`` (seed, output) win."""
        ov = {k: v for k, v in (overrides or {}).items() if v is not None}
        job = str(data.get("job", "")).lower()
        if job not in JOBS:
            raise ConfigError(f"expected one of {', '.join(JOBS)}, got {job!r}", field="job")

        raw_measures = data.get("measures")
        if not isinstance(raw_measures, Mapping) or not raw_measures:
            raise ConfigError("at least one measure section is required", field="measures")
        measures: dict[str, SelfSimilarMeasure] = {}
        for name, section in raw_measures.items():
            try:
                if not isinstance(section, Mapping):
                    raise MeasureSpecError(f"{name}: section must be a mapping")
                measures[name] = measure_from_mapping(_normalize(dict(section)), name=name)
            except MeasureSpecError as e:
                raise ConfigError(str(e), field=f"measures.{name}") from e

        vec = data.get("vector") or {}
        if not isinstance(vec, Mapping):
            raise ConfigError("expected a table", field="vector")
        names = vec.get("components")
        if isinstance(names, str):
            names = [names]
        if not names:
            raise ConfigError("at least one component is required", field="vector.components")
        comps = tuple(
            measures[_measure_name(n, f"vector.components[{i}]", measures)]
            for i, n in enumerate(names)
        )
        ref_name = _measure_name(vec.get("reference", ""), "vector.reference", measures)
        try:
            vm = VectorMeasure(comps, measures[ref_name])
        except MeasureSpecError as e:
            raise ConfigError(str(e), field="vector") from e

        params_in = data.get("params") or {}
        if not isinstance(params_in, Mapping):
            raise ConfigError("expected a table", field="params")
        if job == "spectrum":
            params = _spectrum_params(params_in, vm)
        elif job == "density":
            params = _density_params(params_in, vm, measures)
        elif job == "regularity":
            params = _regularity_params(params_in)
        else:
            params = _verify_params(params_in, vm, measures)
        for key in ("depths", "doubling_depths"):
            if key in params:
                _check_depth_cap(params[key], vm, f"params.{key}")

        seed = ov.get("seed", data.get("seed"))
        output = ov.get("output", data.get("output"))
        return cls(
            job=job,
            measures=measures,
            vector=vm,
            params=params,
            seed=None if seed is None else _int(seed, "seed"),
            output=None if output is None else str(output),
            runtime={k: data[k] for k in RUNTIME_KEYS if k in data},
        )

    def canonical(self) -> dict[str, Any]:
        return {
            "job": self.job,
            "measures": {
                name: {
                    "ratios": list(m.ratios),
                    "offsets": list(m.offsets),
                    "weights": list(m.weights),
                }
                for name, m in sorted(self.measures.items())
            },
            "vector": {
                "components": [m.name for m in self.vector.components],
                "reference": self.vector.reference.name,
            },
            "params": self.params,
            "seed": self.seed,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the validated configuration."""
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()
