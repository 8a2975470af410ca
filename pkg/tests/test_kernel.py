import math
import sys

import pytest
from conftest import binomial, lebesgue
from hypothesis import given, settings
from hypothesis import strategies as st

from mixed_mfa.errors import ContractViolation
from mixed_mfa.kernel import (
    KernelParams,
    gamma,
    log_gamma,
    log_partition,
    moment_sum,
    partition_sum,
)
from mixed_mfa.measure import CascadeSpec, VectorMeasure, build_measure


def test_params_are_bounded() -> None:
    KernelParams((64.0,), -64.0)
    with pytest.raises(ContractViolation, match="q\\[0\\]"):
        KernelParams((65.0,), 0.0)
    with pytest.raises(ContractViolation, match="t="):
        KernelParams((0.0,), math.nan)
    assert KernelParams((1.0, 2.0), 0.5).with_t(0.25) == KernelParams((1.0, 2.0), 0.25)


def test_gamma_matches_direct_product() -> None:
    params = KernelParams((2.0,), -1.0)
    assert log_gamma(params, [0.25], 0.5) == pytest.approx(math.log(1 / 8), rel=1e-12)
    g = gamma(params, [0.25], 0.5)
    assert g.value == pytest.approx(0.125, rel=1e-12)
    assert g.flag is None


def test_gamma_flags_overflow_and_underflow() -> None:
    over = gamma(KernelParams((-64.0,), 0.0), [1e-300], 0.5)
    assert over.value == math.inf and over.flag == "overflow"
    under = gamma(KernelParams((64.0,), 0.0), [1e-300], 0.5)
    assert under.value == sys.float_info.min and under.flag == "underflow"
    assert under.log_value < -40000


def test_gamma_rejects_empty_sets() -> None:
    with pytest.raises(ContractViolation):
        gamma(KernelParams((1.0,), 0.0), [0.0], 0.5)
    with pytest.raises(ContractViolation):
        gamma(KernelParams((1.0, 1.0), 0.0), [0.5], 0.5)


def test_log_partition_edges() -> None:
    assert log_partition([]) == -math.inf
    assert log_partition([math.log(0.25)] * 4) == pytest.approx(0.0, abs=1e-15)
    assert log_partition([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2.0))


def test_partition_sum_binomial_closed_form() -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    s = partition_sum(vm, KernelParams((2.0,), 0.0), 3)
    assert s.value == pytest.approx(0.244140625, rel=1e-12)
    assert s.cell_count == 8
    assert s.kind == "covering"
    packed = partition_sum(vm, KernelParams((2.0,), 0.0), 3, "packing")
    assert packed.value == s.value


def test_two_component_depth_one_sum() -> None:
    second = build_measure(CascadeSpec((0.5, 0.5), (1 / 3, 2 / 3)), "second")
    vm = VectorMeasure((binomial(), second), lebesgue())
    s = partition_sum(vm, KernelParams((1.0, 1.0), 0.0), 1)
    assert s.value == pytest.approx(7 / 12, rel=1e-12)


def test_diameter_kernel_uses_cell_lengths() -> None:
    vm = VectorMeasure((binomial(),), binomial())
    s = partition_sum(vm, KernelParams((0.0,), 1.0), 4, against="diameter")
    assert s.value == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        partition_sum(vm, KernelParams((0.0,), 1.0), 1, "bogus")


@settings(max_examples=40, deadline=None)
@given(
    q=st.floats(min_value=-4.0, max_value=4.0),
    t=st.floats(min_value=-4.0, max_value=4.0),
    n=st.integers(min_value=1, max_value=8),
)
def test_partition_sums_are_multiplicative(q: float, t: float, n: int) -> None:
    vm = VectorMeasure((binomial(),), binomial(0.4, "other"))
    s = partition_sum(vm, KernelParams((q,), t), n)
    assert s.log_value == pytest.approx(n * math.log(moment_sum(vm, (q,), t)), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    q=st.floats(min_value=-3.0, max_value=3.0),
    t=st.floats(min_value=-3.0, max_value=3.0),
    shift=st.floats(min_value=-2.0, max_value=2.0),
    n=st.integers(min_value=1, max_value=8),
)
def test_exponent_shift_against_uniform_reference(q, t, shift, n) -> None:
    vm = VectorMeasure((binomial(),), lebesgue())
    base = partition_sum(vm, KernelParams((q,), t), n).log_value
    moved = partition_sum(vm, KernelParams((q,), t + shift), n).log_value
    assert moved - base == pytest.approx(-n * shift * math.log(2.0), abs=1e-9)


@pytest.mark.parametrize(
    "q,t,mu,nu,expected",
    [
        ((0.0,), 0.0, [0.3], 0.7, 1.0),
        ((1.0,), 1.0, [0.25], 0.5, 0.125),
        ((2.0, -1.0), 0.5, [0.2, 0.4], 0.09, 0.03),
    ],
)
def test_gamma_examples(q, t, mu, nu, expected) -> None:
    g = gamma(KernelParams(q, t), mu, nu)
    naive = math.prod(m**e for m, e in zip(mu, q)) * nu**t
    assert g.value == pytest.approx(expected, rel=1e-12)
    assert g.value == pytest.approx(naive, rel=1e-12)


@pytest.mark.parametrize("q", [-2.0, 0.0, 1.5])
def test_partition_sum_strictly_decreases_in_t(q: float) -> None:
    vm = VectorMeasure((binomial(),), binomial(0.4, "other"))
    ts = [-3.0 + 0.25 * i for i in range(25)]
    values = [partition_sum(vm, KernelParams((q,), t), 6).log_value for t in ts]
    assert all(b < a for a, b in zip(values, values[1:]))
