"""Quasi-Ahlfors index and doubling constants of cascade measures."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Iterable

import numpy as np
from scipy import stats

from .errors import SamplingError
from .measure import SelfSimilarMeasure, VectorMeasure, cells_at_depth, sample_support_points
from .runtime import log

ALPHA_STEP = 0.05
BOUNDED_GROWTH = 1.10
BOUNDED_WINDOW = 5
EXACT_TOL = 1e-9
MIN_DOUBLING_SAMPLES = 64
DOUBLING_TAIL = 3


@dataclass(frozen=True)
class RegularityReport:
    alpha_hat: float
    M_hat: float
    per_depth: tuple[tuple[int, float], ...]
    per_depth_above: tuple[tuple[int, float], ...]
    bounded_at_alpha: bool
    bounded_above: bool
    exact: bool
    verdict: str

    @property
    def flip(self) -> bool:
        return self.bounded_at_alpha and not self.bounded_above

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["flip"] = self.flip
        return d


def critical_index(nu: SelfSimilarMeasure) -> float:
    """``min ln(1/p_i) / ln(1/c_i)`` over the branches with ``p_i > 0``."""
    return min(math.log(p) / math.log(c) for p, c in zip(nu.weights, nu.ratios) if p > 0.0)


def _bounded(values: list[float]) -> bool:
    window = values[-BOUNDED_WINDOW:]
    if len(window) < 2:
        return True
    steps_ok = all(b <= a * BOUNDED_GROWTH for a, b in zip(window, window[1:]))
    return steps_ok and window[-1] <= window[0] * BOUNDED_GROWTH


def quasi_ahlfors_index(
    nu: SelfSimilarMeasure, depths: Iterable[int] = range(0, 21)
) -> RegularityReport:
    """Critical index of ``nu`` and an empirical scan of ``max nu(C) / |C|^alpha``.

    The scan is repeated at ``alpha + 0.05``; the trajectory is bounded when it
    grows by at most 10% over the last five depths.
    """
    ds = sorted({int(d) for d in depths})
    if not ds or ds[0] < 0:
        raise ValueError("depths must be a non-empty range of non-negative integers")
    alpha = critical_index(nu)
    vm = VectorMeasure((nu,), nu)
    at: list[tuple[int, float]] = []
    above: list[tuple[int, float]] = []
    exact = True
    for n in ds:
        table = cells_at_depth(vm, n)
        lr = table.log_nu - alpha * table.log_diameter
        lr_above = table.log_nu - (alpha + ALPHA_STEP) * table.log_diameter
        at.append((n, math.exp(float(lr.max()))))
        above.append((n, math.exp(float(lr_above.max()))))
        if float(lr.max() - lr.min()) > EXACT_TOL:
            exact = False
    bounded = _bounded([v for _, v in at])
    bounded_above = _bounded([v for _, v in above])
    # depth 0 contributes ratio 1
    m_hat = max([1.0] + [v for _, v in at])
    if bounded and exact:
        verdict = "exact-Ahlfors"
    elif bounded:
        verdict = "quasi-Ahlfors"
    else:
        verdict = "not-at-this-alpha"
    log(f"[ahlf ] {nu.label()}: alpha={alpha:.12g} M={m_hat:.6g} verdict={verdict}", "DEBUG")
    return RegularityReport(
        alpha_hat=alpha,
        M_hat=m_hat,
        per_depth=tuple(at),
        per_depth_above=tuple(above),
        bounded_at_alpha=bounded,
        bounded_above=bounded_above,
        exact=exact,
        verdict=verdict,
    )


@dataclass(frozen=True)
class DoublingReport:
    measure: str
    a: float
    per_depth_sup: tuple[tuple[int, float], ...]
    P_a_hat: float
    skipped: int
    growth_slope: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def doubling_constant(
    m: SelfSimilarMeasure,
    a: float = 2.0,
    depths: Iterable[int] = range(6, 13),
    samples: int = 256,
    seed: int | None = None,
) -> DoublingReport:
    """Estimate ``P_a(m)`` from sampled support points.

    The radius at depth ``n`` is ``(max c)^n``. Points whose small ball has no
    mass are skipped and counted.
    """
    if not a > 1.0:
        raise ValueError(f"a must be > 1, got {a}")
    if samples < MIN_DOUBLING_SAMPLES:
        raise SamplingError(
            f"doubling_constant needs at least {MIN_DOUBLING_SAMPLES} samples, got {samples}"
        )
    ds = sorted({int(d) for d in depths})
    if not ds:
        raise ValueError("depths must not be empty")
    rng = np.random.default_rng(seed)
    xs = sample_support_points(VectorMeasure((m,), m), samples, rng=rng).tolist()
    c_max = max(m.ratios)
    sups: list[tuple[int, float]] = []
    skipped = 0
    for n in ds:
        r = c_max**n
        best = -math.inf
        for x in xs:
            small = m.log_ball_mass(x, r)
            if small == -math.inf:
                skipped += 1
                continue
            best = max(best, m.log_ball_mass(x, a * r) - small)
        sups.append((n, math.exp(best) if best > -math.inf else math.nan))
    tail = [v for _, v in sups[-DOUBLING_TAIL:] if math.isfinite(v)]
    p_a = max(tail) if tail else math.inf
    slope = math.nan
    finite = [(n, math.log(v)) for n, v in sups if math.isfinite(v)]
    if len(finite) >= 2:
        slope = float(stats.linregress([n for n, _ in finite], [y for _, y in finite]).slope)
    log(f"[doub ] {m.label()}: a={a:g} P_a={p_a:.6g} skipped={skipped}", "DEBUG")
    return DoublingReport(
        measure=m.label(),
        a=float(a),
        per_depth_sup=tuple(sups),
        P_a_hat=p_a,
        skipped=skipped,
        growth_slope=slope,
    )


@dataclass(frozen=True)
class VectorDoublingReport:
    components: tuple[DoublingReport, ...]
    reference: DoublingReport
    product_P_a: float
    in_PD: bool

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def is_doubling(
    vm: VectorMeasure,
    a: float = 2.0,
    depths: Iterable[int] = range(6, 13),
    samples: int = 256,
    seed: int | None = None,
) -> VectorDoublingReport:
    """Doubling reports for every component and the reference.

    ``product_P_a`` is the product over the components; the vector is in the
    doubling class when every estimate (reference included) is finite.
    """
    ds = list(depths)
    comps = tuple(doubling_constant(m, a, ds, samples, seed) for m in vm.components)
    ref = doubling_constant(vm.reference, a, ds, samples, seed)
    product = math.prod(r.P_a_hat for r in comps)
    in_pd = all(math.isfinite(r.P_a_hat) for r in (*comps, ref))
    return VectorDoublingReport(components=comps, reference=ref, product_P_a=product, in_PD=in_pd)
