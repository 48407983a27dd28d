import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgrow.kernels import (
    KernelDomainError,
    ZeroRateError,
    additive_kernel,
    audit_assumptions,
    bda_residual,
    condensing_kernel,
    constant_kernel,
    eval_kernel,
    kernel_from_spec,
    kernel_spec,
    separable_kernel,
)
from edgrow._expr import RateExpressionError, compile_rational

# Oracle: |log 8 + log 5 + log 5 - log 7 - log 7 - log 4| = log(50/49)
ADDITIVE_RESIDUAL_2_3 = math.log(50.0 / 49.0)


def test_eval_examples():
    assert eval_kernel(constant_kernel(), 5, 7) == 1.0
    assert eval_kernel(condensing_kernel(3.0), 2, 9) == 2.5
    assert eval_kernel(separable_kernel("k", "1"), 3, 0) == 3.0


def test_domain_errors():
    kernel = constant_kernel()
    with pytest.raises(KernelDomainError):
        eval_kernel(kernel, 0, 3)
    with pytest.raises(KernelDomainError):
        eval_kernel(kernel, 2, -1)


def test_eval_is_pure():
    kernel = condensing_kernel(3.0)
    first = eval_kernel(kernel, 17, 23)
    for _ in range(5):
        assert eval_kernel(kernel, 17, 23) == first


def test_bda_residual_separable_vanishes():
    kernel = separable_kernel("k", "(j+1)/(j+2)")
    for k, l in [(1, 1), (2, 3), (4, 9), (30, 7)]:
        assert bda_residual(kernel, k, l) <= 1e-14


def test_bda_residual_constant():
    assert bda_residual(constant_kernel(), 4, 9) == 0.0


def test_bda_residual_additive_oracle():
    kernel = additive_kernel(1.0, 2.0)  # K(k, j) = k + 2(j+1)
    assert bda_residual(kernel, 2, 3) == pytest.approx(ADDITIVE_RESIDUAL_2_3, abs=1e-12)


@given(
    k=st.integers(min_value=1, max_value=60),
    l=st.integers(min_value=1, max_value=60),
)
@settings(max_examples=60, deadline=None)
def test_bda_residual_swap_symmetric(k, l):
    kernel = additive_kernel(1.0, 2.0)
    assert bda_residual(kernel, k, l) == pytest.approx(bda_residual(kernel, l, k), abs=1e-13)


def test_bda_zero_rate_reported():
    kernel = separable_kernel("k - 1", "1")  # K(1, j) = 0
    with pytest.raises(ZeroRateError, match="zero-rate"):
        bda_residual(kernel, 2, 3)


def test_audit_constant():
    report = audit_assumptions(constant_kernel(), 100, 100)
    assert report.k1_ok and report.k2_ok and report.k4_ok
    assert report.bda_max_residual == 0.0
    assert report.zero_rate_pairs == 0
    assert report.probe_range == (100, 100)


def test_audit_condensing():
    report = audit_assumptions(condensing_kernel(3.0), 100, 100)
    assert report.k1_ok
    assert report.growth_constant == 4.0
    assert report.bda_max_residual <= 1e-14
    assert report.k4_ok
    assert report.k3_ratio_deviation < 1e-3


def test_audit_product_kernel_flags_linear_growth():
    report = audit_assumptions(separable_kernel("k", "j+1"), 100, 100)
    assert report.k1_ok
    assert not report.k4_ok  # donor factor grows linearly
    assert report.bda_max_residual <= 1e-13


def test_audit_additive_fails_bda():
    report = audit_assumptions(additive_kernel(1.0, 2.0), 100, 100)
    assert report.k1_ok
    assert report.bda_max_residual > 0.01


def test_audit_report_deterministic():
    kernel = condensing_kernel(3.0)
    a = audit_assumptions(kernel, 50, 60)
    b = audit_assumptions(kernel, 50, 60)
    assert a == b


def test_spec_round_trip():
    for spec in (
        {"family": "constant", "value": 2.0},
        {"family": "condensing", "c": 3.0},
        {"family": "separable", "b": "k", "a": "1"},
        {"family": "additive", "donor_coeff": 1.0, "acceptor_coeff": 2.0},
    ):
        kernel = kernel_from_spec(spec)
        again = kernel_from_spec(kernel_spec(kernel))
        assert eval_kernel(kernel, 3, 4) == eval_kernel(again, 3, 4)


def test_spec_rejects_unknown_family():
    with pytest.raises(RateExpressionError):
        kernel_from_spec({"family": "mystery"})


def test_vectorized_matches_scalar():
    kernel = separable_kernel("k^2/(k+1)", "1 + j")
    ks = np.array([1, 2, 5, 9])
    js = np.array([0, 3, 4, 8])
    grid = kernel(ks, js)
    for k, j, value in zip(ks, js, grid):
        assert value == pytest.approx(eval_kernel(kernel, int(k), int(j)))


class TestRationalGrammar:
    def test_basic(self):
        f = compile_rational("1 + 3/k")
        assert f(np.array([3.0]))[0] == 2.0

    def test_powers_and_parens(self):
        f = compile_rational("(k+1)^2 / (2*k)")
        assert f(np.array([3.0]))[0] == pytest.approx(16.0 / 6.0)

    def test_unary_minus(self):
        f = compile_rational("-k + 4")
        assert f(np.array([1.0]))[0] == 3.0

    def test_rejects_code(self):
        with pytest.raises(RateExpressionError):
            compile_rational("__import__('os')")

    def test_rejects_non_integer_power(self):
        with pytest.raises(RateExpressionError):
            compile_rational("k^0.5")

    def test_rejects_unknown_symbol(self):
        with pytest.raises(RateExpressionError):
            compile_rational("x + 1")
