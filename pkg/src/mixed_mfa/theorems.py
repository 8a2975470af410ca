"""Verification harness: each check returns a :class:`TheoremReport`.

Verdicts are ``pass``, ``fail`` or ``non-informative``; the last one is used
whenever the finite-depth estimates cannot support either conclusion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .density import (
    BallMeasure,
    PointClassification,
    RadiusSchedule,
    SupportSet,
    classify_point,
    map_points,
    sandwich_check,
)
from .dimension import cutoff_t
from .errors import ConfigError
from .measure import SelfSimilarMeasure, VectorMeasure, sample_support_points
from .regularity import is_doubling, quasi_ahlfors_index
from .runtime import log

BILLINGSLEY_TOL = 1e-6
LEVEL_SET_FRACTION = 0.95
LEVEL_SET_DIM_TOL = 0.02
POINTS_PER_CYLINDER = 16


@dataclass(frozen=True)
class TheoremReport:
    theorem_id: str
    inputs: dict[str, Any]
    quantities: dict[str, Any]
    verdict: str
    tolerance: float
    notes: tuple[str, ...] = ()
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def _describe(vm: VectorMeasure) -> dict[str, Any]:
    return {
        "components": [name for name, _ in list(vm.measures())[:-1]],
        "reference": vm.reference.label(),
        "ratios": list(vm.ratios),
    }


def verify_billingsley(
    mu_vm: VectorMeasure,
    nu: SelfSimilarMeasure,
    q_grid: Sequence[float],
    depths: Iterable[int] = range(1, 9),
    mode: str = "auto",
    tolerance: float = BILLINGSLEY_TOL,
) -> TheoremReport:
    """Compare the diameter-kernel cutoff with ``alpha`` times the ``nu``-kernel cutoff.

    With an exactly Ahlfors ``nu`` the two agree; with a quasi-Ahlfors ``nu``
    only ``min(dim, 0) <= alpha dim_nu <= max(dim, 0)`` holds. Scalar grid
    values vary the first component, the others stay at 0.
    """
    if mode not in ("auto", "equality", "inequality"):
        raise ConfigError(f"unknown mode {mode!r}", field="params.mode")
    reg = quasi_ahlfors_index(nu, range(0, 15))
    if mode == "equality" and reg.verdict != "exact-Ahlfors":
        raise ConfigError(
            f"equality needs an exactly Ahlfors reference, {nu.label()} is {reg.verdict}",
            field="params.mode",
        )
    if mode == "auto":
        mode = "equality" if reg.verdict == "exact-Ahlfors" else "inequality"
    vm = VectorMeasure(mu_vm.components, nu)
    alpha = reg.alpha_hat
    ds = list(depths)
    rows: list[dict[str, Any]] = []
    ok = True
    for qv in q_grid:
        q = (float(qv),) + (0.0,) * (vm.k - 1)
        d_mu = cutoff_t(vm, q, "hausdorff", ds, against="diameter").limit
        d_mu_nu = cutoff_t(vm, q, "hausdorff", ds, against="measure").limit
        scaled = alpha * d_mu_nu
        if mode == "equality":
            holds = abs(d_mu - scaled) <= tolerance
        else:
            holds = min(d_mu, 0.0) - tolerance <= scaled <= max(d_mu, 0.0) + tolerance
        ok = ok and holds
        rows.append(
            {
                "q": float(qv),
                "dim_mu": d_mu,
                "dim_mu_nu": d_mu_nu,
                "alpha_dim_mu_nu": scaled,
                "holds": holds,
            }
        )
        log(f"[bill ] q={qv:g} dim_mu={d_mu:.12g} alpha*dim_mu_nu={scaled:.12g}", "DEBUG")
    notes = [
        "dimensions are cutoffs of the full support on the construction grid",
        "Ahlfors ratios are taken over construction cells, not arbitrary sets",
    ]
    if mode == "inequality":
        notes.append("(dim)+ is read as max(dim, 0) and (dim)- as min(dim, 0)")
    return TheoremReport(
        theorem_id="billingsley",
        inputs={**_describe(vm), "q_grid": [float(v) for v in q_grid], "depths": ds},
        quantities={"alpha": alpha, "nu_verdict": reg.verdict, "mode": mode, "rows": rows},
        verdict="pass" if ok else "fail",
        tolerance=tolerance,
        notes=tuple(notes),
    )


def verify_density_bounds(
    E: SupportSet,
    vm: VectorMeasure,
    q: Sequence[float],
    t: float | None = None,
    theta: BallMeasure | None = None,
    sample_points: int = 64,
    depths: Iterable[int] = range(8, 13),
    seed: int | None = None,
    slack: float = 0.05,
    schedule: RadiusSchedule | None = None,
) -> TheoremReport:
    """Density sandwich as a report; ``t`` defaults to the cutoff."""
    ds = list(depths)
    tt = cutoff_t(vm, q, "hausdorff", ds).limit if t is None else float(t)
    rep = sandwich_check(E, q, tt, theta, vm, sample_points, ds, seed, slack, schedule)
    if not rep.informative:
        verdict = "non-informative"
    else:
        verdict = "pass" if rep.hausdorff_ok and rep.packing_ok else "fail"
    return TheoremReport(
        theorem_id="density-bounds",
        inputs={**_describe(vm), "E": E.describe(), "q": list(q), "t": tt, "depths": ds},
        quantities=rep.to_dict(),
        verdict=verdict,
        tolerance=slack,
        notes=rep.notes,
        seed=seed,
    )


def _cylinder_prefixes(
    vm: VectorMeasure, xs: Sequence[float], points: int
) -> tuple[int, tuple[tuple[int, ...], ...]]:
    b = vm.base_count
    ratio = math.log(max(points, 1) / POINTS_PER_CYLINDER) / math.log(b)
    m = max(1, math.floor(ratio + 1e-9))
    words = {vm.reference.address(x, m) for x in xs}
    return m, tuple(sorted(words))


@dataclass
class _Fractions:
    counts: dict[str, int] = field(default_factory=dict)

    def add(self, c: PointClassification) -> None:
        for key in ("in_K_upper", "in_K_lower", "in_T_upper", "in_T_lower", "in_E1", "in_E2"):
            self.counts[key] = self.counts.get(key, 0) + int(getattr(c, key))
        self.counts["in_K"] = self.counts.get("in_K", 0) + int(c.in_K)
        self.counts["in_T"] = self.counts.get("in_T", 0) + int(c.in_T)

    def fractions(self, total: int) -> dict[str, float]:
        return {k: (v / total if total else 0.0) for k, v in sorted(self.counts.items())}


def verify_dimension_of_density_sets(
    vm: VectorMeasure,
    q: Sequence[float],
    depths: Iterable[int] = range(6, 13),
    samples: int = 256,
    seed: int | None = None,
    t: float | None = None,
    tolerance: float = 0.05,
    schedule: RadiusSchedule | None = None,
) -> TheoremReport:
    """Classify sampled points into the density level sets and re-estimate dimensions.

    Points with upper Hausdorff density and lower packing density near 1 are
    the classified set; the union of the depth-``m`` cylinders holding them is
    fed back into the masked cutoff estimators.
    """
    ds = sorted({int(d) for d in depths})
    if not ds:
        raise ValueError("depths must not be empty")
    qv = tuple(float(v) for v in q)
    tt = cutoff_t(vm, qv, "hausdorff", ds).limit if t is None else float(t)
    notes = ["E2 compares the upper and lower packing densities (Delta)"]
    inputs = {**_describe(vm), "q": list(qv), "t": tt, "depths": ds, "samples": samples}

    doubling = is_doubling(vm, 2.0, depths=range(6, 11), samples=64, seed=seed)
    if not doubling.in_PD:
        return TheoremReport(
            theorem_id="density-level-sets",
            inputs=inputs,
            quantities={"in_PD": False},
            verdict="non-informative",
            tolerance=LEVEL_SET_DIM_TOL,
            notes=("vector measure is not doubling",),
            seed=seed,
        )

    rng = np.random.default_rng(seed)
    xs = sample_support_points(vm, samples, rng=rng).tolist()
    support = SupportSet()
    results = map_points(
        lambda x: classify_point(x, support, vm, qv, tt, ds[-1], schedule, tolerance), xs
    )
    classes = [r for r in results if isinstance(r, PointClassification)]
    skipped = len(results) - len(classes)
    tally = _Fractions()
    for c in classes:
        tally.add(c)
    fractions = tally.fractions(len(classes))
    chosen = [c.x for c in classes if c.in_K_upper and c.in_T_lower]
    quantities: dict[str, Any] = {
        "fractions": fractions,
        "classified": len(chosen),
        "skipped": skipped,
        "product_P_a": doubling.product_P_a,
    }
    if not chosen:
        notes.append("no sampled point has densities near 1 at this t")
        return TheoremReport(
            theorem_id="density-level-sets",
            inputs=inputs,
            quantities=quantities,
            verdict="non-informative",
            tolerance=LEVEL_SET_DIM_TOL,
            notes=tuple(notes),
            seed=seed,
        )

    m, prefixes = _cylinder_prefixes(vm, chosen, len(chosen))
    deep = [d for d in ds if d >= m] or [m]
    dim_e = cutoff_t(vm, qv, "hausdorff", deep, prefixes=prefixes).limit
    pack_e = cutoff_t(vm, qv, "packing", deep, prefixes=prefixes).limit
    quantities.update(
        cylinder_depth=m, cylinders=len(prefixes), dim_classified=dim_e, Dim_classified=pack_e
    )
    ok = (
        fractions.get("in_K_upper", 0.0) >= LEVEL_SET_FRACTION
        and fractions.get("in_T_lower", 0.0) >= LEVEL_SET_FRACTION
        and abs(dim_e - tt) <= LEVEL_SET_DIM_TOL
        and abs(pack_e - tt) <= LEVEL_SET_DIM_TOL
    )
    return TheoremReport(
        theorem_id="density-level-sets",
        inputs=inputs,
        quantities=quantities,
        verdict="pass" if ok else "fail",
        tolerance=LEVEL_SET_DIM_TOL,
        notes=tuple(notes),
        seed=seed,
    )
