"""Pointwise (q,t)-densities and the density sandwich.

The density of a measure ``theta`` at ``x`` compares ``theta(B(x, r))`` with the
mixed kernel of the same ball. Upper and lower limits as ``r -> 0`` are read
off as the max and min of the ratio over the tail half of a geometric radius
schedule.

The restricted pre-measure that plays ``theta`` in the level-set statements is
realised on the grid: at depth ``n`` it is the self-similar measure with
weights ``pi_i = A_i w_i^t / S_1(q, t)`` scaled by ``S_n(q, t)``, so it gives
every depth-``n`` cell exactly its kernel value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable, Protocol, Sequence, TypeVar

import numpy as np

from . import runtime as rt
from .errors import DomainError, SamplingError
from .kernel import KernelParams, branch_terms, log_partition, partition_sum, safe_exp
from .measure import (
    DESCENT_MAX_DEPTH,
    CascadeSpec,
    SelfSimilarMeasure,
    VectorMeasure,
    cells_at_depth,
    sample_support_points,
)
from .runtime import log

DEFAULT_TOLERANCE = 0.05
DEFAULT_SLACK = 0.05
DRIFT_LIMIT = 0.01
MIN_SAMPLE_POINTS = 8
GRID_MIN_LENGTH = 1e-13

T = TypeVar("T")
R = TypeVar("R")


class BallMeasure(Protocol):
    def log_interval_mass(self, a: float, b: float) -> float: ...

    def log_ball_mass(self, x: float, r: float) -> float: ...

    def label(self) -> str: ...


@dataclass(frozen=True)
class RadiusSchedule:
    """Geometric radii ``r0 * rho**j`` for ``j < steps``."""

    r0: float = 0.25
    rho: float = 0.5
    steps: int = 40

    def __post_init__(self) -> None:
        if not self.r0 > 0.0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")

    @property
    def tail_start(self) -> int:
        return self.steps // 2

    def radii(self) -> np.ndarray:
        return self.r0 * self.rho ** np.arange(self.steps)

    def describe(self) -> dict[str, Any]:
        return {"r0": self.r0, "rho": self.rho, "steps": self.steps}


@dataclass(frozen=True)
class DensityEstimate:
    x: float
    lower: float
    upper: float
    radii_used: RadiusSchedule
    ratio_trace: tuple[tuple[float, float], ...]
    log_ratios: tuple[float, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class PreMeasure:
    """Grid-realised restricted pre-measure: ``exp(log_scale) * measure``."""

    measure: SelfSimilarMeasure
    log_scale: float
    depth: int
    params: KernelParams

    @property
    def total_mass(self) -> float:
        return safe_exp(self.log_scale)

    def log_interval_mass(self, a: float, b: float) -> float:
        return self.measure.log_interval_mass(a, b) + self.log_scale

    def log_ball_mass(self, x: float, r: float) -> float:
        return self.log_interval_mass(x - r, x + r)

    def log_cylinder_mass(self, word: Sequence[int]) -> float:
        return self.measure.log_cylinder_mass(word) + self.log_scale

    def label(self) -> str:
        return "theta"


@dataclass(frozen=True)
class RestrictedMeasure:
    """``base`` restricted to a finite union of closed intervals."""

    base: BallMeasure
    intervals: tuple[tuple[float, float], ...]

    def log_interval_mass(self, a: float, b: float) -> float:
        terms = [
            self.base.log_interval_mass(max(a, lo), min(b, hi))
            for lo, hi in self.intervals
            if min(b, hi) > max(a, lo)
        ]
        return log_partition(terms)

    def log_ball_mass(self, x: float, r: float) -> float:
        return self.log_interval_mass(x - r, x + r)

    def label(self) -> str:
        return self.base.label()


@dataclass(frozen=True)
class SupportSet:
    """A subset ``E`` of the common support: all of it, or a union of cylinders."""

    prefixes: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        words = tuple(sorted({tuple(int(d) for d in p) for p in self.prefixes}))
        if any(not w for w in words):
            # the empty word is the whole support
            words = ()
        # a word under a shorter listed word adds nothing
        words = tuple(w for w in words if not any(w[: len(v)] == v for v in words if v != w))
        object.__setattr__(self, "prefixes", words)

    @property
    def is_full(self) -> bool:
        return not self.prefixes

    @property
    def max_prefix_length(self) -> int:
        return max((len(p) for p in self.prefixes), default=0)

    def intervals(self, vm: VectorMeasure) -> tuple[tuple[float, float], ...]:
        if self.is_full:
            return ((0.0, 1.0),)
        return tuple(vm.reference.cell(p).interval for p in self.prefixes)

    def contains(self, vm: VectorMeasure, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self.intervals(vm))

    def restrict(self, vm: VectorMeasure, measure: BallMeasure) -> BallMeasure:
        if self.is_full:
            return measure
        return RestrictedMeasure(measure, self.intervals(vm))

    def describe(self) -> str:
        if self.is_full:
            return "support"
        return "cylinders:" + ",".join("".join(str(d) for d in p) for p in self.prefixes)


def _log_kernel_of_ball(vm: VectorMeasure, params: KernelParams, x: float, r: float) -> float:
    terms: list[float] = []
    for (name, m), e in zip(vm.measures(), (*params.q, params.t)):
        lm = m.log_ball_mass(x, r)
        if lm == -math.inf:
            raise DomainError(f"ball B({x:.12g}, {r:.6g}) has zero mass", measure=name, x=x)
        terms.append(e * lm)
    return math.fsum(terms)


def _estimate(x: float, sched: RadiusSchedule, log_ratios: list[float]) -> DensityEstimate:
    radii = sched.radii()
    tail = log_ratios[sched.tail_start :]
    return DensityEstimate(
        x=float(x),
        lower=safe_exp(min(tail)),
        upper=safe_exp(max(tail)),
        radii_used=sched,
        ratio_trace=tuple((float(r), safe_exp(v)) for r, v in zip(radii, log_ratios)),
        log_ratios=tuple(log_ratios),
    )


def density_at(
    x: float,
    theta: BallMeasure,
    vm: VectorMeasure,
    params: KernelParams,
    schedule: RadiusSchedule | None = None,
    *,
    support: SupportSet | None = None,
) -> DensityEstimate:
    """Upper and lower (q,t)-density of ``theta`` at ``x`` relative to ``vm``.

    A :class:`PreMeasure` lives on construction cells and is compared on the
    cylinders containing ``x`` (see :func:`grid_density_at`); any other
    ``theta`` is compared on the balls ``[x - r, x + r]``. ``support``
    restricts ``theta`` to a union of cylinders.
    """
    sched = schedule or RadiusSchedule()
    if params.k != vm.k:
        raise ValueError(f"q has {params.k} components, measure has {vm.k}")
    E = support or SupportSet()
    if isinstance(theta, PreMeasure):
        return grid_density_at(x, theta, vm, params, sched, support=E)
    th = E.restrict(vm, theta)
    log_ratios: list[float] = []
    for r in sched.radii():
        lt = th.log_ball_mass(x, float(r))
        if lt == -math.inf:
            raise DomainError(f"ball B({x:.12g}, {r:.6g}) has zero mass", measure=th.label(), x=x)
        log_ratios.append(lt - _log_kernel_of_ball(vm, params, x, float(r)))
    return _estimate(x, sched, log_ratios)


def _log_restricted_cylinder(theta: PreMeasure, E: SupportSet, word: tuple[int, ...]) -> float:
    """``log theta(C_word ∩ E)`` for a union-of-cylinders ``E``."""
    if E.is_full:
        return theta.log_cylinder_mass(word)
    parts: list[float] = []
    for p in E.prefixes:
        if len(p) <= len(word):
            if word[: len(p)] == p:
                return theta.log_cylinder_mass(word)
        elif p[: len(word)] == word:
            parts.append(theta.log_cylinder_mass(p))
    return log_partition(parts)


def grid_density_at(
    x: float,
    theta: PreMeasure,
    vm: VectorMeasure,
    params: KernelParams,
    schedule: RadiusSchedule | None = None,
    *,
    support: SupportSet | None = None,
) -> DensityEstimate:
    """Density of the grid pre-measure along the cylinders containing ``x``.

    The set used at radius ``r`` is the shallowest cylinder containing ``x``
    whose length is at most ``2 r``, a ball around the cell midpoint. Both
    ``theta`` and the kernel are then exact cell masses, so at the cutoff
    every ratio is 1.
    """
    sched = schedule or RadiusSchedule()
    E = support or SupportSet()
    radii = sched.radii()
    floor = max(2.0 * float(radii[-1]), GRID_MIN_LENGTH)
    depth = min(DESCENT_MAX_DEPTH, math.ceil(math.log(floor) / math.log(max(vm.ratios))))
    try:
        word = vm.reference.address(x, max(depth, 0))
    except ValueError as e:
        raise DomainError(str(e), measure=vm.reference.label(), x=x) from e
    for name, m in vm.measures():
        if m.log_cylinder_mass(word) == -math.inf:
            raise DomainError(f"cylinder {word} has zero mass", measure=name, x=x)

    lengths = np.cumprod([1.0] + [vm.ratios[d] for d in word])
    log_ratios: list[float] = []
    for r in radii:
        hits = np.flatnonzero(lengths <= 2.0 * float(r))
        j = int(hits[0]) if hits.size else len(word)
        cyl = word[:j]
        lt = _log_restricted_cylinder(theta, E, cyl)
        if lt == -math.inf:
            raise DomainError(f"cylinder {cyl} misses {E.describe()}", measure="theta", x=x)
        pairs = zip(vm.measures(), (*params.q, params.t))
        log_gamma = math.fsum(e * m.log_cylinder_mass(cyl) for (_, m), e in pairs)
        log_ratios.append(lt - log_gamma)
    return _estimate(x, sched, log_ratios)


def restricted_premeasure(vm: VectorMeasure, params: KernelParams, depth: int) -> PreMeasure:
    """Build the grid pre-measure at ``(q, t)`` and depth ``depth``."""
    log_a, log_w = branch_terms(vm, params.q)
    log_terms = log_a + params.t * log_w
    log_s1 = log_partition(log_terms)
    pi = np.exp(log_terms - log_s1)
    weights = [0.0] * vm.base_count
    for j, p in zip(vm.allowed, pi.tolist()):
        weights[j] = p
    total = math.fsum(weights)
    weights = [p / total for p in weights]
    spec = CascadeSpec(ratios=vm.ratios, weights=tuple(weights), offsets=vm.offsets)
    return PreMeasure(
        measure=SelfSimilarMeasure(spec, name="theta"),
        log_scale=depth * log_s1,
        depth=depth,
        params=params,
    )


@dataclass(frozen=True)
class PointClassification:
    x: float
    upper_D: float
    lower_D: float
    upper_Delta: float
    lower_Delta: float
    in_K_upper: bool
    in_K_lower: bool
    in_T_upper: bool
    in_T_lower: bool
    in_E1: bool
    in_E2: bool
    tolerance: float

    @property
    def in_K(self) -> bool:
        return self.in_K_upper and self.in_K_lower

    @property
    def in_T(self) -> bool:
        return self.in_T_upper and self.in_T_lower

    def to_row(self) -> dict[str, Any]:
        row = asdict(self)
        row.update(in_K=self.in_K, in_T=self.in_T)
        return row


def _near_one(v: float, tol: float) -> bool:
    return math.isfinite(v) and abs(v - 1.0) <= tol


def classify_point(
    x: float,
    E: SupportSet,
    vm: VectorMeasure,
    q: Sequence[float],
    t: float,
    depth: int = 12,
    schedule: RadiusSchedule | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    theta: BallMeasure | None = None,
) -> PointClassification:
    """Classify ``x`` into the density level sets at ``(q, t)``.

    ``theta`` defaults to the grid pre-measure at depth ``depth`` restricted to
    ``E``. Covering and packing flavours use the same grid cells, so one
    density evaluation fills both.
    """
    if not E.contains(vm, x):
        raise DomainError(f"x={x!r} is outside {E.describe()}", measure="E", x=x)
    params = KernelParams(tuple(q), t)
    th = theta if theta is not None else restricted_premeasure(vm, params, depth)
    est = density_at(x, th, vm, params, schedule, support=E)
    up, lo = est.upper, est.lower
    return PointClassification(
        x=float(x),
        upper_D=up,
        lower_D=lo,
        upper_Delta=up,
        lower_Delta=lo,
        in_K_upper=_near_one(up, tolerance),
        in_K_lower=_near_one(lo, tolerance),
        in_T_upper=_near_one(up, tolerance),
        in_T_lower=_near_one(lo, tolerance),
        in_E1=math.isfinite(up) and up - lo <= tolerance,
        in_E2=math.isfinite(up) and up - lo <= tolerance,
        tolerance=tolerance,
    )


def map_points(fn: Callable[[T], R], items: Sequence[T]) -> list[R | Exception]:
    """Apply ``fn`` per item, in order; domain errors are returned, not raised."""

    def guarded(item: T) -> R | Exception:
        try:
            return fn(item)
        except DomainError as e:
            return e

    if rt.THREADS > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=rt.THREADS) as ex:
            return list(ex.map(guarded, items))
    return [guarded(i) for i in items]


@dataclass(frozen=True)
class SandwichReport:
    theta_E: float
    H_hat: float
    P_hat: float
    inf_upper: float
    sup_upper: float
    inf_lower: float
    sup_lower: float
    hausdorff_ok: bool
    packing_ok: bool
    regime: str
    drift: float
    doubling: bool | None
    points_used: int
    points_skipped: int
    seed: int | None
    slack: float
    notes: tuple[str, ...] = ()

    @property
    def informative(self) -> bool:
        return self.regime == "informative"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


def sandwich_check(
    E: SupportSet,
    q: Sequence[float],
    t: float,
    theta: BallMeasure | None,
    vm: VectorMeasure,
    sample_points: int = 64,
    depths: Iterable[int] = range(8, 13),
    seed: int | None = None,
    slack: float = DEFAULT_SLACK,
    schedule: RadiusSchedule | None = None,
    check_doubling: bool = True,
) -> SandwichReport:
    """Compare ``theta(E)`` with the grid pre-measure times density extremes.

    Verdicts are ``H inf d_up <= theta(E) <= H sup d_up`` (Hausdorff) and the
    packing analogue with the lower density, each with a ``1 + slack`` factor.
    When the pre-measure still drifts by more than 1% between the two deepest
    depths, or a quantity is not finite, the regime is non-informative and the
    verdicts are reported without weight.
    """
    if sample_points < MIN_SAMPLE_POINTS:
        raise SamplingError(
            f"sandwich_check needs at least {MIN_SAMPLE_POINTS} sample points, got {sample_points}"
        )
    ds = sorted({int(d) for d in depths})
    if not ds:
        raise ValueError("depths must not be empty")
    if E.max_prefix_length > ds[0]:
        raise ValueError(f"E has prefixes deeper than the shallowest depth {ds[0]}")
    params = KernelParams(tuple(q), t)
    notes: list[str] = []

    sums = []
    for n in ds:
        mask = cells_at_depth(vm, n).prefix_mask(E.prefixes)
        sums.append(partition_sum(vm, params, n, "covering", mask=mask))
    h_hat = sums[-1].value
    p_hat = partition_sum(
        vm, params, ds[-1], "packing", mask=cells_at_depth(vm, ds[-1]).prefix_mask(E.prefixes)
    ).value
    drift = math.nan
    if len(sums) >= 2 and math.isfinite(sums[-1].log_value) and math.isfinite(sums[-2].log_value):
        drift = abs(math.expm1(sums[-1].log_value - sums[-2].log_value))

    base = theta if theta is not None else restricted_premeasure(vm, params, ds[-1])
    if theta is None:
        notes.append(f"theta realised on the grid at depth {ds[-1]}, compared on cylinders")
    if isinstance(base, PreMeasure):
        theta_e = safe_exp(_log_restricted_cylinder(base, E, ()))
    else:
        theta_e = safe_exp(
            log_partition([base.log_interval_mass(lo, hi) for lo, hi in E.intervals(vm)])
        )

    rng = np.random.default_rng(seed)
    xs = sample_support_points(vm, sample_points, rng=rng, prefixes=E.prefixes).tolist()
    results = map_points(lambda x: density_at(x, base, vm, params, schedule, support=E), xs)
    ests = [r for r in results if isinstance(r, DensityEstimate)]
    skipped = len(results) - len(ests)
    if skipped:
        log(f"[WARN ] sandwich: {skipped} point(s) skipped (zero ball mass)", "WARNING")

    if ests:
        uppers = [e.upper for e in ests]
        lowers = [e.lower for e in ests]
        inf_up, sup_up = min(uppers), max(uppers)
        inf_lo, sup_lo = min(lowers), max(lowers)
    else:
        inf_up = sup_up = inf_lo = sup_lo = math.nan
    grow = 1.0 + slack
    hausdorff_ok = h_hat * inf_up <= theta_e * grow and theta_e <= h_hat * sup_up * grow
    packing_ok = p_hat * inf_lo <= theta_e * grow and theta_e <= p_hat * sup_lo * grow

    doubling: bool | None = None
    if check_doubling:
        from .regularity import is_doubling

        doubling = is_doubling(vm, 2.0, depths=range(6, 11), samples=64, seed=seed).in_PD
        if not doubling:
            notes.append("not doubling: density bounds need a doubling vector measure")

    quantities = [theta_e, h_hat, p_hat, inf_up, sup_up, inf_lo, sup_lo, drift]
    informative = (
        all(math.isfinite(v) for v in quantities) and drift <= DRIFT_LIMIT and doubling is not False
    )
    if not informative and math.isfinite(drift) and drift > DRIFT_LIMIT:
        notes.append(f"pre-measure drifts by {drift:.3g} between depths {ds[-2]} and {ds[-1]}")
    log(
        f"[sand ] theta(E)={theta_e:.6g} H={h_hat:.6g} d_up=[{inf_up:.6g}, {sup_up:.6g}] "
        f"d_lo=[{inf_lo:.6g}, {sup_lo:.6g}] drift={drift:.3g}",
        "DEBUG",
    )
    return SandwichReport(
        theta_E=theta_e,
        H_hat=h_hat,
        P_hat=p_hat,
        inf_upper=inf_up,
        sup_upper=sup_up,
        inf_lower=inf_lo,
        sup_lower=sup_lo,
        hausdorff_ok=bool(hausdorff_ok),
        packing_ok=bool(packing_ok),
        regime="informative" if informative else "non-informative",
        drift=drift,
        doubling=doubling,
        points_used=len(ests),
        points_skipped=skipped,
        seed=seed,
        slack=slack,
        notes=tuple(notes),
    )
