"""Self-similar (cascade / Moran) probability measures on [0, 1].

A measure is fixed by a :class:`CascadeSpec`: ``b`` child intervals
``[offset_i, offset_i + c_i]`` inside ``[0, 1]`` and branch weights ``p_i``.
The mass of the cell with digit word ``w`` is ``prod(p[w_j])`` and its length is
``prod(c[w_j])``. Queries (CDF, interval and ball masses) are answered by digit
descent, so they are exact up to float rounding.

Vector-valued measures bundle ``k`` components with one reference measure
``nu``; all of them share the same ratios and offsets and differ only in their
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .errors import MeasureSpecError, ResourceLimitError

WEIGHT_TOL = 1e-12
GEOMETRY_TOL = 1e-12
DESCENT_MAX_DEPTH = 64
DESCENT_MASS_CUTOFF = 1e-15
MAX_ENUM_BITS = 40
# about 1 GiB of float64 columns for a two-component vector
MAX_TABLE_CELLS = 1 << 24
ADDRESS_TOL = 1e-9


def _as_float(value: Any, what: str) -> float:
    # Config files may spell exact ratios as "1/3".
    try:
        if isinstance(value, str):
            return float(Fraction(value.strip()))
        return float(value)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise MeasureSpecError(f"{what}: not a number: {value!r}") from e


def _as_floats(values: Any, what: str) -> tuple[float, ...]:
    if isinstance(values, (str, bytes)) or not isinstance(values, Sequence):
        raise MeasureSpecError(f"{what}: expected a list of numbers")
    return tuple(_as_float(v, what) for v in values)


@dataclass(frozen=True)
class CascadeSpec:
    """Contraction ratios, child offsets and branch weights of a cascade."""

    ratios: tuple[float, ...]
    weights: tuple[float, ...]
    offsets: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        ratios = _as_floats(self.ratios, "ratios")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "weights", _as_floats(self.weights, "weights"))
        if self.offsets is None:
            # tight packing: each child starts where the previous one ends
            cum = [0.0]
            for c in ratios[:-1]:
                cum.append(cum[-1] + c)
            object.__setattr__(self, "offsets", tuple(cum))
        else:
            object.__setattr__(self, "offsets", _as_floats(self.offsets, "offsets"))

    @property
    def base_count(self) -> int:
        return len(self.ratios)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], *, name: str = "measure") -> "CascadeSpec":
        """Build a spec from a config section (base_count, ratios, weights, offsets)."""
        if not isinstance(data, Mapping):
            raise MeasureSpecError(f"{name}: section must be a mapping")
        missing = [k for k in ("ratios", "weights") if k not in data]
        if missing:
            raise MeasureSpecError(f"{name}: missing key(s): {', '.join(missing)}")
        spec = cls(
            ratios=data["ratios"],
            weights=data["weights"],
            offsets=data.get("offsets"),
        )
        if "base_count" in data:
            try:
                declared = int(data["base_count"])
            except (TypeError, ValueError) as e:
                raise MeasureSpecError(f"{name}: base_count must be an integer") from e
            if declared != spec.base_count:
                raise MeasureSpecError(
                    f"{name}: base_count={declared} but {spec.base_count} ratios given"
                )
        return spec


def validate_spec(spec: CascadeSpec) -> None:
    """Raise :class:`MeasureSpecError` unless ``spec`` describes a non-atomic cascade."""
    b = spec.base_count
    offsets = spec.offsets or ()
    if b < 2:
        raise MeasureSpecError(f"base_count must be >= 2, got {b}")
    if len(spec.weights) != b or len(offsets) != b:
        raise MeasureSpecError(
            f"ratios/offsets/weights lengths differ ({b}, {len(offsets)}, {len(spec.weights)})"
        )
    values = spec.ratios + offsets + spec.weights
    if not all(math.isfinite(v) for v in values):
        raise MeasureSpecError("non-finite entry in cascade spec")
    for i, c in enumerate(spec.ratios):
        if not 0.0 < c < 1.0:
            raise MeasureSpecError(f"ratio {i} must lie in (0, 1), got {c}")
    if math.fsum(spec.ratios) > 1.0 + GEOMETRY_TOL:
        raise MeasureSpecError(f"ratios sum to {math.fsum(spec.ratios)} > 1")
    if offsets[0] < -GEOMETRY_TOL:
        raise MeasureSpecError(f"offset 0 is negative: {offsets[0]}")
    for i in range(b - 1):
        if offsets[i] + spec.ratios[i] > offsets[i + 1] + GEOMETRY_TOL:
            raise MeasureSpecError(f"children {i} and {i + 1} overlap")
    if offsets[-1] + spec.ratios[-1] > 1.0 + GEOMETRY_TOL:
        raise MeasureSpecError(f"child {b - 1} extends past 1")
    if any(p < 0.0 for p in spec.weights):
        raise MeasureSpecError("weights must be non-negative")
    total = math.fsum(spec.weights)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise MeasureSpecError(f"weights sum to {total!r}, expected 1")
    if sum(1 for p in spec.weights if p > 0.0) < 2:
        raise MeasureSpecError("at least two weights must be positive (atomic limit)")


@dataclass(frozen=True)
class Cell:
    """A construction interval identified by its digit word."""

    depth: int
    digits: tuple[int, ...]
    left: float
    length: float

    @property
    def interval(self) -> tuple[float, float]:
        return (self.left, self.left + self.length)


@dataclass(frozen=True)
class SelfSimilarMeasure:
    """Immutable self-similar probability measure; all queries are pure."""

    spec: CascadeSpec
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        validate_spec(self.spec)

    @property
    def base_count(self) -> int:
        return self.spec.base_count

    @property
    def ratios(self) -> tuple[float, ...]:
        return self.spec.ratios

    @property
    def weights(self) -> tuple[float, ...]:
        return self.spec.weights

    @property
    def offsets(self) -> tuple[float, ...]:
        return self.spec.offsets or ()

    @cached_property
    def _ends(self) -> tuple[float, ...]:
        return tuple(o + c for o, c in zip(self.offsets, self.ratios))

    def label(self) -> str:
        return self.name or "measure"

    # -- descent primitives -------------------------------------------------

    def _tail_mass(self, u: float, *, upper: bool) -> float:
        """Mass of ``[0, u]`` (or ``[u, 1]`` when ``upper``) in local cell coordinates."""
        c, off, ends, p = self.ratios, self.offsets, self._ends, self.weights
        order = range(len(c) - 1, -1, -1) if upper else range(len(c))
        parts: list[float] = []
        mass = 1.0
        for _ in range(DESCENT_MAX_DEPTH):
            child = -1
            for i in order:
                covered = u <= off[i] if upper else u >= ends[i]
                if covered:
                    parts.append(mass * p[i])
                    continue
                if off[i] < u < ends[i]:
                    child = i
                break
            if child < 0:
                break
            mass *= p[child]
            if mass < DESCENT_MASS_CUTOFF:
                break
            u = (u - off[child]) / c[child]
        return math.fsum(parts)

    def _split_mass(self, u0: float, u1: float) -> float:
        # [u0, u1] is not inside a single child of the current cell
        c, off, ends, p = self.ratios, self.offsets, self._ends, self.weights
        parts: list[float] = []
        for i in range(len(c)):
            lo, hi = off[i], ends[i]
            if hi <= u0 or lo >= u1 or p[i] == 0.0:
                continue
            if u0 <= lo and hi <= u1:
                parts.append(p[i])
            elif u0 > lo:
                parts.append(p[i] * self._tail_mass((u0 - lo) / c[i], upper=True))
            else:
                parts.append(p[i] * self._tail_mass((u1 - lo) / c[i], upper=False))
        return math.fsum(parts)

    # -- public queries -----------------------------------------------------

    def cdf(self, x: float) -> float:
        """Return ``m([0, x])``; monotone, 0 for ``x <= 0`` and 1 for ``x >= 1``."""
        if x <= 0.0:
            return 0.0
        if x >= 1.0:
            return 1.0
        return min(1.0, self._tail_mass(float(x), upper=False))

    def log_interval_mass(self, a: float, b: float) -> float:
        """Natural log of ``m([a, b])``; ``-inf`` when the interval carries no mass."""
        u0, u1 = max(float(a), 0.0), min(float(b), 1.0)
        if not u1 > u0:
            return -math.inf
        c, off, ends, p = self.ratios, self.offsets, self._ends, self.weights
        log_scale = 0.0
        for _ in range(DESCENT_MAX_DEPTH):
            if u0 <= 0.0 and u1 >= 1.0:
                return log_scale
            child = -1
            for i in range(len(c)):
                if off[i] <= u0 and u1 <= ends[i]:
                    child = i
                    break
            if child < 0:
                total = self._split_mass(u0, u1)
                return log_scale + math.log(total) if total > 0.0 else -math.inf
            if p[child] == 0.0:
                return -math.inf
            log_scale += math.log(p[child])
            u0 = max((u0 - off[child]) / c[child], 0.0)
            u1 = min((u1 - off[child]) / c[child], 1.0)
        # below float resolution: treat the innermost cell as uniform
        return log_scale + math.log(max(u1 - u0, 0.0)) if u1 > u0 else -math.inf

    def interval_mass(self, a: float, b: float) -> float:
        return math.exp(self.log_interval_mass(a, b))

    def log_ball_mass(self, x: float, r: float) -> float:
        return self.log_interval_mass(x - r, x + r)

    def ball_mass(self, x: float, r: float) -> float:
        """Return ``m(B(x, r))`` for the closed interval ``[x - r, x + r]``."""
        if not r > 0.0:
            raise ValueError(f"radius must be positive, got {r}")
        return self.interval_mass(x - r, x + r)

    def cylinder_mass(self, word: Sequence[int]) -> float:
        """Mass of the cell with digit word ``word`` (product of weights)."""
        mass = 1.0
        for d in word:
            mass *= self.weights[d]
        return mass

    def log_cylinder_mass(self, word: Sequence[int]) -> float:
        """Natural log of :meth:`cylinder_mass`; ``-inf`` under a zero weight."""
        if any(self.weights[d] == 0.0 for d in word):
            return -math.inf
        return math.fsum(math.log(self.weights[d]) for d in word)

    def address(self, x: float, depth: int) -> tuple[int, ...]:
        """Digit word of a depth-``depth`` cell containing ``x``.

        A shared endpoint goes to the cell it starts. Child intervals are
        compared in absolute coordinates, so deep words stay exact for points
        given to full float precision. Raises ``ValueError`` when ``x`` falls
        in a gap of the construction.
        """
        c, off, ends = self.ratios, self.offsets, self._ends
        xv = min(max(float(x), 0.0), 1.0)
        left, length = 0.0, 1.0
        word: list[int] = []
        for _ in range(depth):
            los = [left + length * o for o in off]
            his = [left + length * e for e in ends]
            child = next((i for i in range(len(c)) if los[i] <= xv < his[i]), -1)
            if child < 0:
                child = next((i for i in range(len(c) - 1, -1, -1) if xv == his[i]), -1)
            if child < 0:
                tol = ADDRESS_TOL * length + 4.0 * math.ulp(1.0)
                near = (i for i in range(len(c)) if los[i] - tol <= xv <= his[i] + tol)
                child = next(near, -1)
            if child < 0:
                raise ValueError(f"x={x} lies in a gap at depth {len(word)}")
            word.append(child)
            left, length = los[child], length * c[child]
        return tuple(word)

    def cell(self, word: Sequence[int]) -> Cell:
        left, length = 0.0, 1.0
        for d in word:
            left += length * self.offsets[d]
            length *= self.ratios[d]
        return Cell(depth=len(word), digits=tuple(int(d) for d in word), left=left, length=length)


def build_measure(spec: CascadeSpec, name: str = "") -> SelfSimilarMeasure:
    """Validate ``spec`` and return the measure it describes."""
    return SelfSimilarMeasure(spec=spec, name=name)


def measure_from_mapping(data: Mapping[str, Any], *, name: str = "measure") -> SelfSimilarMeasure:
    return build_measure(CascadeSpec.from_mapping(data, name=name), name=name)


@dataclass(frozen=True)
class VectorMeasure:
    """Components ``mu = (mu_1, ..., mu_k)`` and a reference measure ``nu``."""

    components: tuple[SelfSimilarMeasure, ...]
    reference: SelfSimilarMeasure

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise MeasureSpecError("a vector measure needs at least one component")
        ref = self.reference
        for m in comps:
            if m.base_count != ref.base_count or not all(
                abs(a - b) <= GEOMETRY_TOL
                for a, b in zip(m.ratios + m.offsets, ref.ratios + ref.offsets)
            ):
                raise MeasureSpecError(
                    f"component {m.label()!r} does not share the geometry of {ref.label()!r}"
                )
        if sum(self.branch_mask) < 2:
            raise MeasureSpecError("common support is atomic: fewer than two shared branches")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def base_count(self) -> int:
        return self.reference.base_count

    @property
    def ratios(self) -> tuple[float, ...]:
        return self.reference.ratios

    @property
    def offsets(self) -> tuple[float, ...]:
        return self.reference.offsets

    @cached_property
    def branch_mask(self) -> tuple[bool, ...]:
        """Branches with positive weight under every component and the reference."""
        measures = self.components + (self.reference,)
        return tuple(
            all(m.weights[i] > 0.0 for m in measures) for i in range(self.base_count)
        )

    @cached_property
    def allowed(self) -> tuple[int, ...]:
        return tuple(i for i, ok in enumerate(self.branch_mask) if ok)

    @cached_property
    def anchor(self) -> float:
        """Leftmost point of the common support."""
        j = self.allowed[0]
        return self.offsets[j] / (1.0 - self.ratios[j])

    def measures(self) -> Iterator[tuple[str, SelfSimilarMeasure]]:
        for i, m in enumerate(self.components):
            yield (m.name or f"mu[{i}]", m)
        yield (self.reference.name or "nu", self.reference)


@dataclass(frozen=True)
class CellTable:
    """Cells of one depth with positive mass under every measure of a vector.

    Rows are in lexicographic order of digit words; ``codes`` holds each word as
    a base-``b`` integer.
    """

    depth: int
    base: int
    codes: np.ndarray
    left: np.ndarray
    diameter: np.ndarray
    log_diameter: np.ndarray
    log_mu: np.ndarray
    log_nu: np.ndarray

    def __len__(self) -> int:
        return int(self.codes.shape[0])

    @property
    def mu_masses(self) -> np.ndarray:
        return np.exp(self.log_mu)

    @property
    def nu_masses(self) -> np.ndarray:
        return np.exp(self.log_nu)

    def digits(self, i: int) -> tuple[int, ...]:
        code = int(self.codes[i])
        out = []
        for _ in range(self.depth):
            code, d = divmod(code, self.base)
            out.append(d)
        return tuple(reversed(out))

    def cell(self, i: int) -> Cell:
        return Cell(
            depth=self.depth,
            digits=self.digits(i),
            left=float(self.left[i]),
            length=float(self.diameter[i]),
        )

    def rows(self) -> Iterator[tuple[Cell, np.ndarray, float, float]]:
        """Yield ``(cell, mu-mass vector, nu-mass, diameter)`` per cell."""
        mu = self.mu_masses
        nu = self.nu_masses
        for i in range(len(self)):
            yield self.cell(i), mu[i], float(nu[i]), float(self.diameter[i])

    def prefix_mask(self, prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        """Cells lying in one of the cylinders named by ``prefixes``."""
        if not prefixes:
            return np.ones(len(self), dtype=bool)
        mask = np.zeros(len(self), dtype=bool)
        for prefix in prefixes:
            word = tuple(prefix)
            if len(word) > self.depth:
                raise ValueError(f"prefix {word} is deeper than the cell depth {self.depth}")
            code = 0
            for d in word:
                code = code * self.base + int(d)
            shift = self.base ** (self.depth - len(word))
            mask |= (self.codes // shift) == code
        return mask


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def max_table_depth(branches: int) -> int:
    """Deepest cell table with ``branches`` live branches under the memory cap."""
    if branches < 2:
        return MAX_ENUM_BITS
    depth = 0
    while branches ** (depth + 1) <= MAX_TABLE_CELLS:
        depth += 1
    return depth


@lru_cache(maxsize=8)
def cells_at_depth(vm: VectorMeasure, n: int) -> CellTable:
    """Enumerate the depth-``n`` cells of the common support of ``vm``."""
    if n < 0:
        raise ValueError(f"depth must be >= 0, got {n}")
    b = vm.base_count
    if n * math.log2(b) > MAX_ENUM_BITS:
        raise ResourceLimitError(
            f"depth {n} would enumerate up to {b}^{n} cells",
            hint=f"use depth <= {int(MAX_ENUM_BITS / math.log2(b))} for base {b}",
        )
    cells = len(vm.allowed) ** n
    if cells > MAX_TABLE_CELLS:
        raise ResourceLimitError(
            f"depth {n} would hold {cells} cells in memory",
            hint=f"use depth <= {max_table_depth(len(vm.allowed))} for {len(vm.allowed)} branches",
        )
    allowed = np.asarray(vm.allowed, dtype=np.int64)
    c = np.asarray(vm.ratios, dtype=float)[allowed]
    off = np.asarray(vm.offsets, dtype=float)[allowed]
    log_c = np.log(c)
    log_p = np.log(
        np.array([[m.weights[j] for j in vm.allowed] for m in vm.components], dtype=float)
    ).T
    log_w = np.log(np.array([vm.reference.weights[j] for j in vm.allowed], dtype=float))

    codes = np.zeros(1, dtype=np.int64)
    left = np.zeros(1)
    diam = np.ones(1)
    log_diam = np.zeros(1)
    log_mu = np.zeros((1, vm.k))
    log_nu = np.zeros(1)
    for _ in range(n):
        codes = (codes[:, None] * b + allowed[None, :]).ravel()
        left = (left[:, None] + diam[:, None] * off[None, :]).ravel()
        diam = (diam[:, None] * c[None, :]).ravel()
        log_diam = (log_diam[:, None] + log_c[None, :]).ravel()
        log_mu = (log_mu[:, None, :] + log_p[None, :, :]).reshape(-1, vm.k)
        log_nu = (log_nu[:, None] + log_w[None, :]).ravel()
    return CellTable(
        depth=n,
        base=b,
        codes=_frozen(codes),
        left=_frozen(left),
        diameter=_frozen(diam),
        log_diameter=_frozen(log_diam),
        log_mu=_frozen(log_mu),
        log_nu=_frozen(log_nu),
    )


def sample_support_points(
    vm: VectorMeasure,
    count: int,
    *,
    depth: int = 20,
    rng: np.random.Generator,
    prefixes: Sequence[Sequence[int]] = (),
) -> np.ndarray:
    """Draw ``count`` points of the common support of ``vm``.

    Each point is the image of the support's leftmost point inside a random
    depth-``depth`` cell, so it lies in ``S_mu ∩ S_nu``. With ``prefixes`` the
    cells are drawn under one of the given cylinders.
    """
    allowed = np.asarray(vm.allowed, dtype=np.int64)
    ok = set(vm.allowed)
    words = [tuple(int(d) for d in p) for p in prefixes] or [()]
    for w in words:
        if len(w) > depth or any(d not in ok for d in w):
            raise MeasureSpecError(f"prefix {w} leaves the common support or exceeds depth")
    c = np.asarray(vm.ratios, dtype=float)
    off = np.asarray(vm.offsets, dtype=float)
    which = rng.integers(0, len(words), size=count)
    digits = allowed[rng.integers(0, len(allowed), size=(count, depth))]
    for idx, w in enumerate(words):
        if w:
            digits[which == idx, : len(w)] = np.asarray(w, dtype=np.int64)
    left = np.zeros(count)
    length = np.ones(count)
    for j in range(depth):
        col = digits[:, j]
        left = left + length * off[col]
        length = length * c[col]
    return left + length * vm.anchor
