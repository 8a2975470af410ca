"""Cutoff dimensions and the Legendre spectrum.

For each depth ``n`` the cutoff is the root ``t_n`` of ``S_n(q, t) = 1``. On a
construction grid covering and packing sums coincide, so the Hausdorff,
packing and pre-packing cutoffs are the same number and only the ``kind`` tag
differs; in general ``dim <= Dim <= Delta``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import optimize, stats

from . import runtime as rt
from .kernel import PARAM_BOUND, branch_terms, kernel_exponents, log_partition
from .measure import VectorMeasure, cells_at_depth
from .runtime import log

KIND_TAGS = ("hausdorff", "packing", "prepacking")
BISECT_XTOL = 1e-13
BISECT_MAXITER = 200
EQUAL_BRANCH_TOL = 1e-15


@dataclass(frozen=True)
class DepthRoot:
    depth: int
    root: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class DimensionEstimate:
    q: tuple[float, ...]
    kind: str
    against: str
    per_depth_roots: tuple[DepthRoot, ...]
    limit: float
    slope_check: float
    oracle: float | None
    saturated: bool = False
    diagnostic: str = ""

    @property
    def oracle_error(self) -> float | None:
        if self.oracle is None or not math.isfinite(self.limit):
            return None
        return abs(self.limit - self.oracle)


@dataclass(frozen=True)
class SpectrumPoint:
    q: float
    tau: float
    alpha: float
    f_alpha: float
    component: int = 0


def _norm_depths(depths: Iterable[int]) -> list[int]:
    out = sorted({int(d) for d in depths})
    if not out:
        raise ValueError("depths must not be empty")
    if out[0] < 1:
        raise ValueError(f"depths must be >= 1, got {out[0]}")
    return out


def _root(a: np.ndarray, b: np.ndarray) -> tuple[float, float, int, str]:
    """Root of ``log sum exp(a + t b)`` on the parameter bracket."""
    if a.size == 0:
        return -math.inf, math.nan, 0, "no cells"

    def f(t: float) -> float:
        return log_partition(a + t * b)

    lo, hi = -PARAM_BOUND, PARAM_BOUND
    f_lo, f_hi = f(lo), f(hi)
    # f is non-increasing in t because every cell has mass (or length) below 1
    if f_lo < 0.0:
        return -math.inf, math.nan, 0, f"S < 1 already at t={lo:g}"
    if f_hi > 0.0:
        return math.inf, math.nan, 0, f"S > 1 still at t={hi:g}"
    if f_lo == 0.0:
        return lo, 0.0, 0, ""
    if f_hi == 0.0:
        return hi, 0.0, 0, ""
    root, res = optimize.bisect(
        f, lo, hi, xtol=BISECT_XTOL, maxiter=BISECT_MAXITER, full_output=True, disp=False
    )
    diag = "" if res.converged else f"bisection stopped after {res.iterations} iterations"
    return float(root), abs(math.expm1(f(root))), int(res.iterations), diag


def oracle_root(vm: VectorMeasure, q: Sequence[float], *, against: str = "measure") -> float:
    """Root of the depth-one moment equation ``sum_i A_i x_i^t = 1``.

    With equal ``x_i`` this is ``log(sum A) / log(1/x)``; otherwise Brent's
    method on the bracket. Returns ``+-inf`` when the bracket holds no root.
    """
    log_a, log_x = branch_terms(vm, q, against=against)
    if float(np.ptp(log_x)) <= EQUAL_BRANCH_TOL * abs(float(log_x[0])):
        return log_partition(log_a) / -float(log_x[0])

    def g(t: float) -> float:
        return log_partition(log_a + t * log_x)

    if g(-PARAM_BOUND) < 0.0:
        return -math.inf
    if g(PARAM_BOUND) > 0.0:
        return math.inf
    return float(optimize.brentq(g, -PARAM_BOUND, PARAM_BOUND, xtol=BISECT_XTOL, maxiter=500))


def cutoff_t(
    vm: VectorMeasure,
    q: Sequence[float],
    kind: str = "hausdorff",
    depths: Iterable[int] = range(1, 13),
    *,
    against: str = "measure",
    prefixes: Sequence[Sequence[int]] = (),
) -> DimensionEstimate:
    """Estimate the cutoff dimension of ``S_n(q, .)`` per depth.

    ``prefixes`` restricts the sums to the cells under the given digit words
    (a union of cylinders); the closed-form oracle is reported only for the
    full support. A bracket without a sign change gives a saturated ``+-inf``
    estimate and a diagnostic instead of an error.
    """
    if kind not in KIND_TAGS:
        raise ValueError(f"kind must be one of {KIND_TAGS}, got {kind!r}")
    qv = tuple(float(v) for v in q)
    ds = _norm_depths(depths)
    roots: list[DepthRoot] = []
    exps: list[tuple[np.ndarray, np.ndarray]] = []
    diags: list[str] = []
    for n in ds:
        mask = cells_at_depth(vm, n).prefix_mask(prefixes) if prefixes else None
        a, b = kernel_exponents(vm, qv, n, against=against, mask=mask)
        root, residual, iters, diag = _root(a, b)
        if diag:
            diags.append(f"n={n}: {diag}")
        roots.append(DepthRoot(depth=n, root=root, residual=residual, iterations=iters))
        exps.append((a, b))
        log(f"[root ] q={qv} n={n} t={root:.12g} |S-1|={residual:.3g}", "DEBUG")

    limit = roots[-1].root
    saturated = not math.isfinite(limit)
    slope = math.nan
    if not saturated and len(ds) >= 2:
        ys = [log_partition(a + limit * b) for a, b in exps]
        slope = float(stats.linregress(ds, ys).slope)
    oracle = None if prefixes else oracle_root(vm, qv, against=against)
    return DimensionEstimate(
        q=qv,
        kind=kind,
        against=against,
        per_depth_roots=tuple(roots),
        limit=limit,
        slope_check=slope,
        oracle=oracle,
        saturated=saturated,
        diagnostic="; ".join(diags),
    )


def dim_q(
    vm: VectorMeasure, q: Sequence[float], depths: Iterable[int] = range(1, 13), **kw: Any
) -> DimensionEstimate:
    return cutoff_t(vm, q, "hausdorff", depths, **kw)


def Dim_q(  # noqa: N802
    vm: VectorMeasure, q: Sequence[float], depths: Iterable[int] = range(1, 13), **kw: Any
) -> DimensionEstimate:
    return cutoff_t(vm, q, "packing", depths, **kw)


def Delta_q(  # noqa: N802
    vm: VectorMeasure, q: Sequence[float], depths: Iterable[int] = range(1, 13), **kw: Any
) -> DimensionEstimate:
    return cutoff_t(vm, q, "prepacking", depths, **kw)


def log_sum_slope(
    vm: VectorMeasure,
    q: Sequence[float],
    s: float,
    depths: Iterable[int],
    *,
    against: str = "measure",
) -> float:
    """Regression slope of ``ln S_n(q, s)`` on ``n``.

    Negative above the cutoff (the sums vanish), positive below it.
    """
    ds = _norm_depths(depths)
    if len(ds) < 2:
        raise ValueError("need at least two depths for a slope")
    ys = []
    for n in ds:
        a, b = kernel_exponents(vm, q, n, against=against)
        ys.append(log_partition(a + float(s) * b))
    return float(stats.linregress(ds, ys).slope)


def _grid_q(component: int, value: float, frozen: Sequence[float]) -> tuple[float, ...]:
    others = list(frozen)
    return tuple(others[:component] + [value] + others[component:])


def spectrum_estimates(
    vm: VectorMeasure,
    q_grid: Sequence[float],
    frozen: Sequence[float] | None = None,
    depths: Iterable[int] = range(1, 13),
    *,
    component: int = 0,
    kind: str = "hausdorff",
    against: str = "measure",
) -> list[DimensionEstimate]:
    """Cutoff estimates along ``q_grid`` for the varied ``component``, in grid order.

    ``frozen`` holds the values of the other ``k - 1`` components in order
    (zeros by default).
    """
    grid = [float(v) for v in q_grid]
    if len(grid) < 3:
        raise ValueError("q_grid needs at least 3 values")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("q_grid must be strictly increasing")
    if not 0 <= component < vm.k:
        raise ValueError(f"component {component} out of range for k={vm.k}")
    fz = list(frozen) if frozen is not None else [0.0] * (vm.k - 1)
    if len(fz) != vm.k - 1:
        raise ValueError(f"frozen needs {vm.k - 1} values, got {len(fz)}")
    ds = _norm_depths(depths)

    def tau(value: float) -> DimensionEstimate:
        return cutoff_t(vm, _grid_q(component, value, fz), kind, ds, against=against)

    if rt.THREADS > 1:
        with ThreadPoolExecutor(max_workers=rt.THREADS) as ex:
            return list(ex.map(tau, grid))
    return [tau(v) for v in grid]


def legendre_points(
    estimates: Sequence[DimensionEstimate], component: int = 0
) -> list[SpectrumPoint]:
    """Legendre points: ``alpha = -d tau / dq`` and ``f = alpha q + tau``.

    Derivatives are central differences, one-sided at the ends. Saturated
    estimates are skipped with a warning and differences use the surviving
    neighbours.
    """
    qs: list[float] = []
    taus: list[float] = []
    for est in estimates:
        value = est.q[component]
        if est.saturated:
            log(f"[WARN ] skipping q={value:g}: {est.diagnostic}", "WARNING")
            continue
        qs.append(value)
        taus.append(est.limit)
    if len(qs) < 2:
        return []
    q_arr = np.asarray(qs)
    tau_arr = np.asarray(taus)
    idx = np.arange(len(qs))
    lo = np.maximum(idx - 1, 0)
    hi = np.minimum(idx + 1, len(qs) - 1)
    alphas = -(tau_arr[hi] - tau_arr[lo]) / (q_arr[hi] - q_arr[lo])
    return [
        SpectrumPoint(
            q=qv, tau=tv, alpha=float(av), f_alpha=float(av) * qv + tv, component=component
        )
        for qv, tv, av in zip(qs, taus, alphas)
    ]


def legendre_spectrum(
    vm: VectorMeasure,
    q_grid: Sequence[float],
    frozen: Sequence[float] | None = None,
    depths: Iterable[int] = range(1, 13),
    *,
    component: int = 0,
    kind: str = "hausdorff",
    against: str = "measure",
) -> list[SpectrumPoint]:
    """Legendre transform of ``tau(q)`` along one varied component."""
    estimates = spectrum_estimates(
        vm, q_grid, frozen, depths, component=component, kind=kind, against=against
    )
    return legendre_points(estimates, component)


def cutoff_rows(estimate: DimensionEstimate) -> list[dict[str, Any]]:
    """Per-depth table rows for a cutoff estimate."""
    rows: list[dict[str, Any]] = []
    for r in estimate.per_depth_roots:
        row: dict[str, Any] = {f"q{i}": v for i, v in enumerate(estimate.q)}
        row.update(
            kind=estimate.kind,
            depth=r.depth,
            root=r.root,
            residual=r.residual,
            oracle=estimate.oracle if estimate.oracle is not None else math.nan,
            abs_error=(
                abs(r.root - estimate.oracle)
                if estimate.oracle is not None and math.isfinite(r.root)
                else math.nan
            ),
        )
        rows.append(row)
    return rows
