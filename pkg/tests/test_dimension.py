import math

import pytest
from conftest import binomial, cantor, lebesgue

from mixed_mfa import runtime as rt
from mixed_mfa.dimension import (
    Delta_q,
    Dim_q,
    cutoff_rows,
    cutoff_t,
    dim_q,
    legendre_points,
    legendre_spectrum,
    log_sum_slope,
    oracle_root,
    spectrum_estimates,
)
from mixed_mfa.measure import CascadeSpec, VectorMeasure, build_measure


@pytest.mark.parametrize("q", [-2.0, -1.0, 0.0, 1.0, 2.0])
def test_binomial_cutoff_matches_closed_form(q: float) -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    est = cutoff_t(vm, (q,), depths=range(1, 13))
    expected = math.log2(0.25**q + 0.75**q)
    assert est.limit == pytest.approx(expected, abs=1e-8)
    assert est.oracle == pytest.approx(expected, abs=1e-12)
    assert est.oracle_error is not None and est.oracle_error <= 1e-8
    assert not est.saturated


def test_anchor_values_at_q_zero_and_one() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    assert cutoff_t(vm, (0.0,)).limit == pytest.approx(1.0, abs=1e-10)
    assert cutoff_t(vm, (1.0,)).limit == pytest.approx(0.0, abs=1e-10)


def test_two_component_cutoff() -> None:
    second = build_measure(CascadeSpec((0.5, 0.5), (1 / 3, 2 / 3)), "second")
    vm = VectorMeasure((binomial(), second), lebesgue())
    est = cutoff_t(vm, (1.0, 1.0), depths=[12])
    assert est.limit == pytest.approx(math.log2(7 / 12), abs=1e-8)


def test_uniform_self_cutoff_is_one_minus_q() -> None:
    m = lebesgue()
    vm = VectorMeasure((m,), m)
    for q in (-1.5, 0.0, 0.5, 3.0):
        assert cutoff_t(vm, (q,), depths=range(1, 6)).limit == pytest.approx(1.0 - q, abs=1e-10)


def test_cantor_cutoff_against_measure_and_diameter() -> None:
    vm = VectorMeasure((cantor(),), cantor())
    assert cutoff_t(vm, (0.0,)).limit == pytest.approx(1.0, abs=1e-10)
    by_size = cutoff_t(vm, (0.0,), against="diameter")
    assert by_size.limit == pytest.approx(math.log(2) / math.log(3), abs=1e-10)
    assert by_size.against == "diameter"


def test_unequal_branches_use_brent_oracle() -> None:
    m = build_measure(CascadeSpec((0.5, 0.25), (0.5, 0.5)), "uneven")
    vm = VectorMeasure((m,), m)
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    expected = math.log(golden) / math.log(0.5)
    assert oracle_root(vm, (0.0,), against="diameter") == pytest.approx(expected, abs=1e-12)
    est = cutoff_t(vm, (0.0,), depths=range(1, 8), against="diameter")
    assert all(r.root == pytest.approx(expected, abs=1e-9) for r in est.per_depth_roots)


def test_kinds_coincide_on_the_grid() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    ests = [f(vm, (2.0,), range(1, 9)) for f in (dim_q, Dim_q, Delta_q)]
    assert [e.kind for e in ests] == ["hausdorff", "packing", "prepacking"]
    assert ests[0].limit == ests[1].limit == ests[2].limit
    with pytest.raises(ValueError):
        cutoff_t(vm, (2.0,), "box")


def test_slope_changes_sign_across_the_cutoff() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    t_star = math.log2(5 / 8)
    above = log_sum_slope(vm, (2.0,), t_star + 0.01, range(1, 9))
    below = log_sum_slope(vm, (2.0,), t_star - 0.01, range(1, 9))
    assert above == pytest.approx(-0.01 * math.log(2.0), abs=1e-9)
    assert below == pytest.approx(0.01 * math.log(2.0), abs=1e-9)
    est = cutoff_t(vm, (2.0,), depths=range(1, 9))
    assert est.slope_check == pytest.approx(0.0, abs=1e-9)


def test_saturated_estimate_reports_a_diagnostic() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    est = cutoff_t(vm, (-64.0,), depths=range(1, 4))
    assert est.saturated
    assert est.limit == math.inf
    assert "S > 1" in est.diagnostic
    assert math.isnan(est.slope_check)


def test_prefixes_restrict_the_sum() -> None:
    m = lebesgue()
    vm = VectorMeasure((m,), m)
    est = cutoff_t(vm, (0.0,), depths=range(1, 5), prefixes=[(1,)])
    assert est.oracle is None
    assert [r.root for r in est.per_depth_roots] == pytest.approx(
        [(n - 1) / n for n in range(1, 5)], abs=1e-10
    )


def test_depths_must_be_positive() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    with pytest.raises(ValueError):
        cutoff_t(vm, (1.0,), depths=[])
    with pytest.raises(ValueError):
        cutoff_t(vm, (1.0,), depths=[0, 1])


def test_legendre_uniform_spectrum_is_flat() -> None:
    m = lebesgue()
    points = legendre_spectrum(VectorMeasure((m,), m), [-1.0, 0.0, 1.0, 2.0], depths=range(1, 4))
    assert [p.q for p in points] == [-1.0, 0.0, 1.0, 2.0]
    for p in points:
        assert p.alpha == pytest.approx(1.0, abs=1e-9)
        assert p.f_alpha == pytest.approx(1.0, abs=1e-9)


def test_legendre_binomial_values_and_monotone_alpha() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    h = 1e-3
    points = legendre_spectrum(vm, [-h, 0.0, h], depths=range(1, 4))
    mid = points[1]
    assert mid.alpha == pytest.approx(1.207519, abs=1e-4)
    assert mid.f_alpha == pytest.approx(1.0, abs=1e-9)
    at_one = legendre_spectrum(vm, [1.0 - h, 1.0, 1.0 + h], depths=range(1, 4))[1]
    assert at_one.alpha == pytest.approx(0.811278, abs=1e-4)
    coarse = legendre_spectrum(vm, [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0], depths=range(1, 4))
    by_q = {p.q: p.alpha for p in coarse}
    assert by_q[-2.0] > by_q[0.0] > by_q[2.0]


def test_threaded_spectrum_keeps_grid_order(monkeypatch: pytest.MonkeyPatch) -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    grid = [-2.0, -1.0, 0.0, 1.0, 2.0]
    serial = spectrum_estimates(vm, grid, depths=range(1, 6))
    monkeypatch.setattr(rt, "THREADS", 4)
    threaded = spectrum_estimates(vm, grid, depths=range(1, 6))
    assert [e.q for e in threaded] == [e.q for e in serial]
    assert [e.limit for e in threaded] == [e.limit for e in serial]


def test_saturated_points_are_skipped_by_legendre() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    ests = spectrum_estimates(vm, [-64.0, 0.0, 1.0, 2.0], depths=range(1, 3))
    points = legendre_points(ests)
    assert [p.q for p in points] == [0.0, 1.0, 2.0]


def test_cutoff_rows_carry_oracle_error() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    rows = cutoff_rows(cutoff_t(vm, (2.0,), depths=[1, 2]))
    assert [r["depth"] for r in rows] == [1, 2]
    assert rows[0]["q0"] == 2.0
    assert rows[-1]["abs_error"] <= 1e-10
