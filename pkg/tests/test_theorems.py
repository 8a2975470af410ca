import math

import pytest
from conftest import binomial, cantor, lebesgue

from mixed_mfa.density import SupportSet
from mixed_mfa.errors import ConfigError
from mixed_mfa.measure import VectorMeasure
from mixed_mfa.theorems import (
    verify_billingsley,
    verify_density_bounds,
    verify_dimension_of_density_sets,
)


def test_billingsley_equality_on_the_cantor_construction() -> None:
    nu = cantor()
    vm = VectorMeasure((cantor((0.25, 0.75), "weighted"),), nu)
    rep = verify_billingsley(vm, nu, [-1.0, 0.0, 1.0, 2.0])
    assert rep.verdict == "pass"
    assert rep.quantities["mode"] == "equality"
    assert rep.quantities["alpha"] == pytest.approx(math.log(2) / math.log(3), abs=1e-12)
    at_zero = next(r for r in rep.quantities["rows"] if r["q"] == 0.0)
    assert at_zero["dim_mu"] == pytest.approx(math.log(2) / math.log(3), abs=1e-8)
    assert at_zero["dim_mu_nu"] == pytest.approx(1.0, abs=1e-8)
    for row in rep.quantities["rows"]:
        assert abs(row["dim_mu"] - row["alpha_dim_mu_nu"]) <= 1e-6


def test_billingsley_inequality_with_quasi_ahlfors_reference() -> None:
    nu = binomial()
    vm = VectorMeasure((lebesgue(),), nu)
    rep = verify_billingsley(vm, nu, [-1.0, 0.0, 1.0, 2.0])
    assert rep.quantities["mode"] == "inequality"
    assert rep.quantities["nu_verdict"] == "quasi-Ahlfors"
    assert rep.passed
    with pytest.raises(ConfigError, match="params.mode"):
        verify_billingsley(vm, nu, [0.0], mode="equality")
    with pytest.raises(ConfigError):
        verify_billingsley(vm, nu, [0.0], mode="sometimes")


def test_lebesgue_reference_gives_identical_cutoffs() -> None:
    nu = lebesgue()
    vm = VectorMeasure((binomial(),), nu)
    rep = verify_billingsley(vm, nu, [-2.0, -1.0, 0.0, 1.0, 2.0])
    assert rep.verdict == "pass"
    for row in rep.quantities["rows"]:
        expected = math.log2(0.25 ** row["q"] + 0.75 ** row["q"])
        assert row["dim_mu"] == pytest.approx(expected, abs=1e-8)
        assert row["dim_mu_nu"] == pytest.approx(expected, abs=1e-8)


def test_density_bounds_cancellation_case() -> None:
    mu = binomial()
    vm = VectorMeasure((mu,), lebesgue())
    rep = verify_density_bounds(
        SupportSet(), vm, (1.0,), 0.0, mu, sample_points=64, depths=range(6, 9), seed=1
    )
    assert rep.verdict == "pass"
    assert rep.quantities["theta_E"] == pytest.approx(1.0, abs=1e-9)
    assert rep.quantities["H_hat"] == pytest.approx(1.0, abs=1e-9)
    assert rep.theorem_id == "density-bounds"
    assert rep.inputs["E"] == "support"


def test_density_bounds_off_cutoff_is_non_informative() -> None:
    m = lebesgue()
    vm = VectorMeasure((m,), m)
    rep = verify_density_bounds(
        SupportSet(), vm, (0.0,), 1.3, sample_points=8, depths=range(6, 9), seed=1
    )
    assert rep.verdict == "non-informative"


def test_level_sets_uniform_self_case() -> None:
    m = lebesgue()
    vm = VectorMeasure((m,), m)
    rep = verify_dimension_of_density_sets(vm, (0.0,), range(6, 10), samples=128, seed=9)
    assert rep.verdict == "pass", rep.quantities
    assert rep.inputs["t"] == pytest.approx(1.0, abs=1e-10)
    assert rep.quantities["fractions"]["in_K_upper"] == 1.0
    assert rep.quantities["cylinder_depth"] == 3
    assert rep.quantities["dim_classified"] == pytest.approx(1.0, abs=0.02)


def test_level_sets_cancellation_case() -> None:
    mu = binomial()
    vm = VectorMeasure((mu,), lebesgue())
    rep = verify_dimension_of_density_sets(vm, (1.0,), range(6, 10), samples=128, seed=2)
    assert rep.inputs["t"] == pytest.approx(0.0, abs=1e-10)
    assert rep.quantities["classified"] == 128
    assert rep.quantities["dim_classified"] == pytest.approx(0.0, abs=0.02)
    assert rep.verdict == "pass"


def test_level_sets_off_cutoff_classify_nothing() -> None:
    m = lebesgue()
    vm = VectorMeasure((m,), m)
    rep = verify_dimension_of_density_sets(
        vm, (0.0,), range(6, 10), samples=64, seed=9, t=1.3
    )
    assert rep.quantities["classified"] == 0
    assert rep.verdict == "non-informative"
    assert rep.to_dict()["notes"]


def test_level_sets_at_the_binomial_cutoff() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    rep = verify_dimension_of_density_sets(vm, (2.0,), range(6, 13), samples=256, seed=21)
    assert rep.inputs["t"] == pytest.approx(math.log2(5 / 8), abs=1e-9)
    assert rep.quantities["fractions"]["in_K_upper"] >= 0.95
    assert rep.quantities["fractions"]["in_T_lower"] >= 0.95
    assert rep.quantities["dim_classified"] == pytest.approx(math.log2(5 / 8), abs=0.02)
    assert rep.verdict == "pass", rep.quantities


def test_density_bounds_at_the_binomial_cutoff() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    rep = verify_density_bounds(
        SupportSet(), vm, (2.0,), sample_points=64, depths=range(8, 13), seed=21
    )
    assert rep.inputs["t"] == pytest.approx(math.log2(5 / 8), abs=1e-9)
    assert rep.quantities["points_used"] == 64
    assert rep.verdict == "pass"
