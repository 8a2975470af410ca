"""Mixed kernel and grid partition sums.

For a cell ``C`` the kernel is ``prod_i mu_i(C)^q_i * nu(C)^t``. Everything is
evaluated in log space; values are exponentiated only at the edge, with
overflow and underflow flagged rather than raised.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ContractViolation
from .measure import VectorMeasure, cells_at_depth
from .runtime import log

PARAM_BOUND = 64.0
LOG_FLOAT_MAX = math.log(sys.float_info.max)
KINDS = ("covering", "packing")
AGAINST = ("measure", "diameter")


def safe_exp(value: float) -> float:
    if value > LOG_FLOAT_MAX:
        return math.inf
    return math.exp(value)


@dataclass(frozen=True)
class KernelParams:
    q: tuple[float, ...]
    t: float

    def __post_init__(self) -> None:
        q = tuple(float(v) for v in self.q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", float(self.t))
        if not q:
            raise ContractViolation("q must have at least one component")
        for name, v in [*((f"q[{i}]", v) for i, v in enumerate(q)), ("t", self.t)]:
            if not math.isfinite(v) or abs(v) > PARAM_BOUND:
                raise ContractViolation(f"{name}={v!r} outside [-{PARAM_BOUND:g}, {PARAM_BOUND:g}]")

    @property
    def k(self) -> int:
        return len(self.q)

    def with_t(self, t: float) -> "KernelParams":
        return KernelParams(self.q, t)


class GammaValue(NamedTuple):
    value: float
    log_value: float
    flag: str | None


def _check_mass(m: float) -> float:
    m = float(m)
    if not (math.isfinite(m) and m > 0.0):
        raise ContractViolation(f"masses must be positive and finite, got {m!r}")
    return m


def log_gamma(params: KernelParams, mu_masses: Sequence[float], nu_mass: float) -> float:
    if len(mu_masses) != params.k:
        raise ContractViolation(f"expected {params.k} component masses, got {len(mu_masses)}")
    terms = [qi * math.log(_check_mass(m)) for qi, m in zip(params.q, mu_masses)]
    terms.append(params.t * math.log(_check_mass(nu_mass)))
    return math.fsum(terms)


def gamma(params: KernelParams, mu_masses: Sequence[float], nu_mass: float) -> GammaValue:
    """Kernel value for one set with the given component and reference masses."""
    lv = log_gamma(params, mu_masses, nu_mass)
    if lv > LOG_FLOAT_MAX:
        return GammaValue(math.inf, lv, "overflow")
    value = math.exp(lv)
    if value < sys.float_info.min:
        return GammaValue(sys.float_info.min, lv, "underflow")
    return GammaValue(value, lv, None)


def log_partition(log_terms: Iterable[float] | np.ndarray) -> float:
    """Return ``log(sum(exp(x)))`` with a max shift and one ``fsum`` pass."""
    x = np.asarray(log_terms, dtype=float).ravel()
    if x.size == 0:
        return -math.inf
    top = float(np.max(x))
    if not math.isfinite(top):
        return top
    return top + math.log(math.fsum(np.exp(x - top).tolist()))


@dataclass(frozen=True)
class PartitionSum:
    value: float
    log_value: float
    depth: int
    kind: str
    cell_count: int
    against: str = "measure"


def kernel_exponents(
    vm: VectorMeasure,
    q: Sequence[float],
    n: int,
    *,
    against: str = "measure",
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell ``(a, b)`` with ``log Gamma(C) = a + t * b`` at depth ``n``."""
    if against not in AGAINST:
        raise ValueError(f"against must be one of {AGAINST}, got {against!r}")
    if len(q) != vm.k:
        raise ContractViolation(f"q has {len(q)} components, measure has {vm.k}")
    table = cells_at_depth(vm, n)
    a = table.log_mu @ np.asarray(q, dtype=float)
    b = table.log_nu if against == "measure" else table.log_diameter
    if mask is not None:
        a = a[mask]
        b = b[mask]
    return a, b


def partition_sum(
    vm: VectorMeasure,
    params: KernelParams,
    n: int,
    kind: str = "covering",
    *,
    against: str = "measure",
    mask: np.ndarray | None = None,
) -> PartitionSum:
    """Sum of the kernel over the depth-``n`` cells (optionally masked).

    Grid cells are disjoint, so the covering and packing sums coincide; ``kind``
    only tags the result.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    a, b = kernel_exponents(vm, params.q, n, against=against, mask=mask)
    lv = log_partition(a + params.t * b)
    log(f"[sum  ] n={n} q={params.q} t={params.t:.6g} cells={a.size} log S={lv:.6g}", "DEBUG")
    return PartitionSum(
        value=safe_exp(lv),
        log_value=lv,
        depth=n,
        kind=kind,
        cell_count=int(a.size),
        against=against,
    )


def branch_terms(
    vm: VectorMeasure, q: Sequence[float], *, against: str = "measure"
) -> tuple[np.ndarray, np.ndarray]:
    """Depth-one ``(log A_i, log x_i)`` over the shared positive branches."""
    return kernel_exponents(vm, q, 1, against=against)


def moment_sum(
    vm: VectorMeasure, q: Sequence[float], t: float, *, against: str = "measure"
) -> float:
    """Depth-one sum ``sum_i prod_j p_ji^q_j * w_i^t``; depth ``n`` sums are its powers."""
    a, b = branch_terms(vm, q, against=against)
    return safe_exp(log_partition(a + float(t) * b))
