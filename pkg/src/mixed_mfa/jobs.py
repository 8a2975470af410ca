"""Job dispatch: run a validated :class:`JobConfig` and write its artifacts."""

from __future__ import annotations

import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import runtime as rt
from .artifacts import header_block, write_document, write_table
from .config import JobConfig
from .density import (
    PointClassification,
    RadiusSchedule,
    SupportSet,
    classify_point,
    map_points,
    sandwich_check,
)
from .dimension import cutoff_rows, cutoff_t, legendre_points, spectrum_estimates
from .kernel import KernelParams
from .measure import sample_support_points
from .regularity import is_doubling, quasi_ahlfors_index
from .runtime import log
from .theorems import (
    TheoremReport,
    verify_billingsley,
    verify_density_bounds,
    verify_dimension_of_density_sets,
)

GRID_NOTE = "covering and packing sums coincide on the construction grid"


def _progress(msg: str) -> None:
    if rt.PROGRESS:
        log(f"[PROG ] {msg}")


def _cutoff(cfg: JobConfig) -> float:
    p = cfg.params
    if p.get("t") is not None:
        return float(p["t"])
    est = cutoff_t(cfg.vector, p["q"], "hausdorff", p["depths"])
    log(f"[job  ] t defaults to the cutoff {est.limit:.12g}")
    return est.limit


def _run_spectrum(cfg: JobConfig, out: Path, fmt: str, digest: str) -> int:
    p = cfg.params
    estimates = spectrum_estimates(
        cfg.vector,
        p["q_grid"],
        p["frozen"],
        p["depths"],
        component=p["component"],
        kind=p["kind"],
        against=p["against"],
    )
    _progress(f"{len(estimates)} grid points solved")
    points = legendre_points(estimates, p["component"])
    header = header_block(cfg.job, digest, cfg.seed, [GRID_NOTE])
    rows = [
        {"q": sp.q, "tau": sp.tau, "alpha": sp.alpha, "f_alpha": sp.f_alpha} for sp in points
    ]
    write_table(out, "spectrum", ["q", "tau", "alpha", "f_alpha"], rows, header, fmt)
    cut_rows: list[dict[str, Any]] = []
    for est in estimates:
        cut_rows.extend(cutoff_rows(est))
    columns = [f"q{i}" for i in range(cfg.vector.k)]
    columns += ["kind", "depth", "root", "residual", "oracle", "abs_error"]
    write_table(out, "cutoffs", columns, cut_rows, header, fmt)
    log(f"[OK   ] spectrum: {len(points)}/{len(estimates)} points -> {out}")
    return 0


def _run_density(cfg: JobConfig, out: Path, fmt: str, digest: str) -> int:
    p = cfg.params
    vm = cfg.vector
    t = _cutoff(cfg)
    params = KernelParams(tuple(p["q"]), t)
    E = SupportSet(tuple(tuple(w) for w in p["prefixes"]))
    theta = cfg.measures[p["theta"]] if p["theta"] else None
    sched = RadiusSchedule(**p["schedule"])
    rng = np.random.default_rng(cfg.seed)
    sampled = sample_support_points(vm, p["samples"], rng=rng, prefixes=E.prefixes).tolist()
    xs = list(p["points"]) + sampled

    def one(x: float) -> PointClassification:
        return classify_point(x, E, vm, params.q, t, p["depths"][-1], sched, p["tolerance"], theta)

    results = map_points(one, xs)
    rows: list[dict[str, Any]] = []
    skipped = 0
    for x, res in zip(xs, results):
        if isinstance(res, Exception):
            skipped += 1
            log(f"[WARN ] x={x:.12g}: {res}", "WARNING")
            continue
        row: dict[str, Any] = {"x": res.x}
        row.update({f"q{i}": v for i, v in enumerate(params.q)})
        row.update(t=t, lower=res.lower_D, upper=res.upper_D, in_K=res.in_K, in_T=res.in_T)
        rows.append(row)
    _progress(f"{len(rows)} point(s) classified, {skipped} skipped")

    notes = [GRID_NOTE, "theta is the pre-measure at the same t as the density kernel"]
    header = header_block(cfg.job, digest, cfg.seed, notes)
    columns = ["x"] + [f"q{i}" for i in range(vm.k)] + ["t", "lower", "upper", "in_K", "in_T"]
    write_table(out, "density", columns, rows, header, fmt)

    rep = sandwich_check(
        E, params.q, t, theta, vm, p["samples"], p["depths"], cfg.seed, p["slack"], sched
    )
    write_document(out, "sandwich.json", rep.to_dict(), header)
    log(
        f"[OK   ] density: {len(rows)} point(s), sandwich regime={rep.regime} "
        f"hausdorff_ok={rep.hausdorff_ok} packing_ok={rep.packing_ok}"
    )
    return 0


def _run_regularity(cfg: JobConfig, out: Path, fmt: str, digest: str) -> int:
    p = cfg.params
    vm = cfg.vector
    ahlfors: dict[str, Any] = {}
    a_rows: list[dict[str, Any]] = []
    for name, m in vm.measures():
        if name in ahlfors:
            continue
        rep = quasi_ahlfors_index(m, p["depths"])
        ahlfors[name] = rep.to_dict()
        scans = ((rep.alpha_hat, rep.per_depth), (rep.alpha_hat + 0.05, rep.per_depth_above))
        for alpha, series in scans:
            a_rows.extend(
                {"measure": name, "depth": n, "alpha": alpha, "max_ratio": v} for n, v in series
            )
        log(f"[ahlf ] {name}: alpha_hat={rep.alpha_hat:.12g} verdict={rep.verdict}")
    vdr = is_doubling(vm, p["a"], p["doubling_depths"], p["samples"], cfg.seed)
    d_rows = [
        {"measure": r.measure, "depth": n, "sup_ratio": v}
        for r in (*vdr.components, vdr.reference)
        for n, v in r.per_depth_sup
    ]
    header = header_block(cfg.job, digest, cfg.seed)
    write_table(out, "ahlfors", ["measure", "depth", "alpha", "max_ratio"], a_rows, header, fmt)
    write_table(out, "doubling", ["measure", "depth", "sup_ratio"], d_rows, header, fmt)
    write_document(out, "regularity.json", {"ahlfors": ahlfors, "doubling": vdr.to_dict()}, header)
    log(f"[OK   ] regularity: product P_a={vdr.product_P_a:.6g} in_PD={vdr.in_PD}")
    return 0


def _run_verify(cfg: JobConfig, out: Path, fmt: str, digest: str) -> int:
    p = cfg.params
    vm = cfg.vector
    reports: list[TheoremReport] = []
    checks = p["checks"]
    if "billingsley" in checks:
        nu = cfg.measures[p["nu"]]
        reports.append(verify_billingsley(vm, nu, p["q_grid"], p["depths"], p["mode"]))
    sched = RadiusSchedule(**p["schedule"]) if "schedule" in p else None
    theta = cfg.measures[p["theta"]] if p.get("theta") else None
    if "density-bounds" in checks:
        reports.append(
            verify_density_bounds(
                SupportSet(),
                vm,
                p["q"],
                p["t"],
                theta,
                p["samples"],
                p["depths"],
                cfg.seed,
                schedule=sched,
            )
        )
    if "density-level-sets" in checks:
        reports.append(
            verify_dimension_of_density_sets(
                vm, p["q"], p["depths"], p["samples"], cfg.seed, p["t"], p["tolerance"], sched
            )
        )
    failed = 0
    for rep in reports:
        tag = {"pass": "[OK   ]", "fail": "[FAIL ]"}.get(rep.verdict, "[WARN ]")
        log(f"{tag} {rep.theorem_id}: {rep.verdict}", "INFO" if rep.verdict != "fail" else "ERROR")
        failed += rep.verdict == "fail"
    notes = [n for rep in reports for n in rep.notes]
    header = header_block(cfg.job, digest, cfg.seed, sorted(set(notes)))
    write_document(out, "verify.json", [r.to_dict() for r in reports], header)
    return 1 if failed else 0


_RUNNERS: dict[str, Callable[[JobConfig, Path, str, str], int]] = {
    "spectrum": _run_spectrum,
    "density": _run_density,
    "regularity": _run_regularity,
    "verify": _run_verify,
}


def run_job(cfg: JobConfig, *, out_dir: str | None = None, fmt: str | None = None) -> int:
    """Run ``cfg`` and return an exit code: 0 done, 1 a verification failed."""
    out = Path(out_dir or cfg.output or rt.OUTPUT_DIR or ".")
    fmt = (fmt or rt.OUTPUT_FORMAT).lower()
    digest = cfg.digest()
    log("=" * 64)
    log(f"[job  ] {cfg.job} config_sha256={digest[:12]} seed={cfg.seed} -> {out}")
    if rt.DRY_RUN:
        keys = ", ".join(f"{k}={v}" for k, v in sorted(cfg.params.items()))
        log(f"[DRY  ] would run {cfg.job} ({keys}); nothing written")
        return 0
    t0 = time.perf_counter()
    rc = _RUNNERS[cfg.job](cfg, out, fmt, digest)
    log(f"[DONE ] {cfg.job} exit={rc} elapsed={time.perf_counter() - t0:.2f}s")
    return rc
