import math

import numpy as np
import pytest
from conftest import binomial, cantor, lebesgue
from hypothesis import given, settings
from hypothesis import strategies as st

from mixed_mfa.errors import MeasureSpecError, ResourceLimitError
from mixed_mfa.measure import (
    CascadeSpec,
    VectorMeasure,
    build_measure,
    cells_at_depth,
    max_table_depth,
    measure_from_mapping,
    sample_support_points,
)


def test_cdf_first_level_and_symmetry() -> None:
    assert binomial().cdf(0.5) == pytest.approx(0.25, abs=1e-15)
    assert cantor().cdf(1 / 3) == pytest.approx(0.5, abs=1e-15)
    assert cantor().cdf(0.5) == pytest.approx(0.5, abs=1e-15)


def test_cdf_fixed_point_of_binomial_at_one_third() -> None:
    assert binomial().cdf(1 / 3) == pytest.approx(1 / 13, rel=1e-9)


def test_cdf_of_lebesgue_is_identity() -> None:
    m = lebesgue()
    for x in (0.1, 0.3, 0.7, 0.95):
        assert m.cdf(x) == pytest.approx(x, abs=1e-12)
    assert m.cdf(-1.0) == 0.0
    assert m.cdf(2.0) == 1.0


def test_ball_mass_one_child_and_gap() -> None:
    assert binomial().ball_mass(0.75, 0.25) == pytest.approx(0.75, rel=1e-12)
    assert cantor().ball_mass(0.5, 0.1) == 0.0
    with pytest.raises(ValueError):
        binomial().ball_mass(0.5, 0.0)


def test_cell_masses_at_depth_two() -> None:
    m = binomial()
    table = cells_at_depth(VectorMeasure((m,), m), 2)
    masses = sorted(table.mu_masses[:, 0].tolist())
    assert masses == pytest.approx([1 / 16, 3 / 16, 3 / 16, 9 / 16], rel=1e-12)
    assert [table.digits(i) for i in range(len(table))] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert m.cylinder_mass((1, 0)) == pytest.approx(3 / 16)


def test_fraction_strings_are_accepted() -> None:
    spec = CascadeSpec(("1/3", "1/3"), ("1/2", "1/2"), (0, "2/3"))
    m = build_measure(spec, "cantor")
    assert m.ratios == pytest.approx((1 / 3, 1 / 3))
    assert m.offsets == pytest.approx((0.0, 2 / 3))


@pytest.mark.parametrize(
    "ratios,weights,offsets,needle",
    [
        ((0.5, 0.5), (0.5, 0.4), None, "weights sum"),
        ((0.5, 0.5), (1.0, 0.0), None, "atomic"),
        ((1.0, 0.5), (0.5, 0.5), None, "ratio 0"),
        ((0.5, 0.5), (0.5, 0.5), (0.0, 0.25), "overlap"),
        ((0.5,), (1.0,), None, "base_count"),
    ],
)
def test_invalid_specs_are_rejected(ratios, weights, offsets, needle) -> None:
    with pytest.raises(MeasureSpecError) as ei:
        build_measure(CascadeSpec(ratios, weights, offsets))
    assert needle in str(ei.value)


def test_from_mapping_checks_base_count() -> None:
    with pytest.raises(MeasureSpecError, match="base_count=3"):
        measure_from_mapping({"base_count": 3, "ratios": [0.5, 0.5], "weights": [0.5, 0.5]})
    with pytest.raises(MeasureSpecError, match="missing"):
        measure_from_mapping({"ratios": [0.5, 0.5]}, name="m")


def test_address_and_cells() -> None:
    m = binomial()
    assert m.address(0.5, 1) == (1,)
    assert m.address(1.0, 2) == (1, 1)
    assert m.address(0.3, 2) == (0, 1)
    c = m.cell((1, 0))
    assert c.interval == pytest.approx((0.5, 0.75))
    with pytest.raises(ValueError):
        cantor().address(0.5, 1)


def test_vector_measure_needs_shared_geometry_and_support() -> None:
    with pytest.raises(MeasureSpecError, match="geometry"):
        VectorMeasure((cantor(),), lebesgue())
    thirds = (1 / 3, 1 / 3, 1 / 3)
    left = build_measure(CascadeSpec(thirds, (0.5, 0.5, 0.0)), "left")
    right = build_measure(CascadeSpec(thirds, (0.0, 0.5, 0.5)), "right")
    with pytest.raises(MeasureSpecError, match="atomic"):
        VectorMeasure((left,), right)
    vm = VectorMeasure((binomial(),), lebesgue())
    assert vm.k == 1
    assert [name for name, _ in vm.measures()] == ["binomial", "lebesgue"]
    assert vm.anchor == 0.0
    # the first positive branch of `right` is the middle third, fixed point 1/2
    assert VectorMeasure((right,), right).anchor == pytest.approx(0.5)


def test_enumeration_cap_and_prefix_depth() -> None:
    m = lebesgue()
    vm = VectorMeasure((m,), m)
    with pytest.raises(ResourceLimitError, match="depth <= 40"):
        cells_at_depth(vm, 41)
    with pytest.raises(ResourceLimitError, match="cells in memory"):
        cells_at_depth(vm, 25)
    assert max_table_depth(2) == 24
    assert max_table_depth(3) == 15
    with pytest.raises(ValueError):
        cells_at_depth(vm, 2).prefix_mask([(0, 1, 0)])
    mask = cells_at_depth(vm, 3).prefix_mask([(1,)])
    assert mask.tolist() == [False] * 4 + [True] * 4


def test_sampled_points_lie_in_the_common_support() -> None:
    m = cantor()
    vm = VectorMeasure((m,), m)
    rng = np.random.default_rng(7)
    xs = sample_support_points(vm, 200, rng=rng)
    assert all(m.log_ball_mass(x, 1e-9) > -math.inf for x in xs.tolist())
    right = sample_support_points(vm, 50, rng=rng, prefixes=[(1,)])
    assert (right >= 2 / 3 - 1e-12).all()


@settings(max_examples=60, deadline=None)
@given(
    p0=st.floats(min_value=0.05, max_value=0.95),
    x=st.floats(min_value=0.0, max_value=1.0),
    y=st.floats(min_value=0.0, max_value=1.0),
)
def test_cdf_is_monotone(p0: float, x: float, y: float) -> None:
    m = binomial(p0)
    lo, hi = min(x, y), max(x, y)
    assert m.cdf(lo) <= m.cdf(hi) + 1e-12


@settings(max_examples=30, deadline=None)
@given(
    w=st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=2, max_size=4),
    n=st.integers(min_value=1, max_value=6),
)
def test_cell_masses_sum_to_one(w: list[float], n: int) -> None:
    total = math.fsum(w)
    weights = tuple(v / total for v in w)
    weights = weights[:-1] + (1.0 - math.fsum(weights[:-1]),)
    ratios = tuple(1.0 / len(w) for _ in w)
    m = build_measure(CascadeSpec(ratios, weights))
    table = cells_at_depth(VectorMeasure((m,), m), n)
    assert math.fsum(table.mu_masses[:, 0].tolist()) == pytest.approx(1.0, abs=1e-10)
    assert math.fsum(table.diameter.tolist()) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(
    x=st.floats(min_value=0.0, max_value=1.0),
    r=st.floats(min_value=1e-6, max_value=0.5),
)
def test_ball_mass_matches_cdf_difference(x: float, r: float) -> None:
    m = binomial()
    assert m.ball_mass(x, r) == pytest.approx(m.cdf(x + r) - m.cdf(x - r), abs=1e-12)


def test_cell_rows_of_uniform_and_binomial_tables() -> None:
    m = lebesgue()
    rows = list(cells_at_depth(VectorMeasure((m,), m), 2).rows())
    assert len(rows) == 4
    for cell, mu, nu, diam in rows:
        assert mu.tolist() == pytest.approx([0.25], rel=1e-12)
        assert nu == pytest.approx(0.25, rel=1e-12)
        assert diam == pytest.approx(0.25, rel=1e-12)
        assert cell.interval[1] - cell.interval[0] == pytest.approx(0.25)
    table = cells_at_depth(VectorMeasure((binomial(),), lebesgue()), 2)
    mus = [float(mu[0]) for _, mu, _, _ in table.rows()]
    assert mus == pytest.approx([1 / 16, 3 / 16, 3 / 16, 9 / 16], rel=1e-12)
    assert table.nu_masses.tolist() == pytest.approx([0.25] * 4, rel=1e-12)
    assert [c.digits for c, *_ in table.rows()] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_ball_mass_is_bracketed_by_depth_ten_cells() -> None:
    m = binomial()
    table = cells_at_depth(VectorMeasure((m,), m), 10)
    cells = [(c.interval, float(mu[0])) for c, mu, _, _ in table.rows()]
    boundary = 2 * 0.75**10
    rng = np.random.default_rng(11)
    for x, r in zip(rng.uniform(0.0, 1.0, 40), rng.uniform(1e-3, 0.3, 40)):
        lo, hi = x - r, x + r
        inside = math.fsum(w for (a, b), w in cells if lo <= a and b <= hi)
        ball = m.ball_mass(float(x), float(r))
        assert inside - 1e-12 <= ball <= inside + boundary + 1e-12


def test_cdf_is_monotone_on_random_pairs() -> None:
    m = binomial()
    rng = np.random.default_rng(3)
    pairs = np.sort(rng.uniform(-0.1, 1.1, size=(1000, 2)), axis=1)
    for lo, hi in pairs.tolist():
        assert m.cdf(lo) <= m.cdf(hi) + 1e-15


def test_address_recovers_deep_binary_words() -> None:
    m = lebesgue()
    rng = np.random.default_rng(5)
    for _ in range(20):
        digits = tuple(int(d) for d in rng.integers(0, 2, size=30))
        x = math.fsum(d * 2.0 ** -(j + 1) for j, d in enumerate(digits))
        assert m.address(x, 30) == digits
        assert m.address(x, 45) == digits + (0,) * 15
