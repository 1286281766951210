import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankties.floatsim import (BF16, FP16, FP32, PrecisionFormat, grid_values,
                               qfunc, qop, quantize, quantize_array, ulp)

from reference import round_to_format


def test_canonical_formats():
    assert (BF16.exponent_bits, BF16.mantissa_bits) == (8, 7)
    assert (FP16.exponent_bits, FP16.mantissa_bits) == (5, 10)
    assert (FP32.exponent_bits, FP32.mantissa_bits) == (8, 23)
    assert FP16.max_finite == 65504.0
    assert BF16.min_normal == 2.0 ** -126


def test_format_validation():
    with pytest.raises(ValueError):
        PrecisionFormat(1, 7)
    with pytest.raises(ValueError):
        PrecisionFormat(8, 0)


class TestQuantize:
    def test_exactly_representable(self):
        assert quantize(1.0, BF16) == 1.0
        assert quantize(0.99609375, BF16) == 0.99609375

    def test_rounds_to_grid(self):
        # frozen from the rational round-to-nearest-even reference
        assert quantize(0.3, BF16) == 0.30078125
        assert quantize(0.3, FP16) == 0.300048828125
        assert quantize(0.3, BF16) == round_to_format(0.3, 8, 7)
        assert quantize(0.3, FP16) == round_to_format(0.3, 5, 10)

    def test_idempotent_on_examples(self):
        for x in (0.3, -0.3, 1e-3, 12345.678):
            q = quantize(x, BF16)
            assert quantize(q, BF16) == q

    def test_signed_zero_and_nan(self):
        assert math.copysign(1.0, quantize(-0.0, BF16)) == -1.0
        assert math.copysign(1.0, quantize(0.0, BF16)) == 1.0
        assert math.isnan(quantize(math.nan, BF16))
        assert quantize(math.inf, FP16) == math.inf

    def test_overflow_boundary(self):
        # values at or past max_finite + half an ulp round to infinity
        boundary = 2.0 ** 128 - 2.0 ** 119  # bf16: 2^127 * (2 - 2^-8)
        assert quantize(boundary, BF16) == math.inf
        assert quantize(np.nextafter(boundary, 0.0), BF16) == BF16.max_finite
        assert quantize(-boundary, BF16) == -math.inf
        assert quantize(1e39, BF16) == math.inf

    def test_subnormals(self):
        q = BF16.subnormal_spacing
        assert quantize(1e-40, BF16) == round(1e-40 / q) * q
        assert quantize(q / 4, BF16) == 0.0
        assert quantize(3 * q / 4, BF16) == q
        # ties to even in the subnormal range
        assert quantize(q / 2, BF16) == 0.0
        assert quantize(3 * q / 2, BF16) == 2 * q


class TestUlp:
    def test_examples(self):
        assert ulp(0.75, BF16) == 2.0 ** -8
        assert ulp(0.75, FP32) == 2.0 ** -24
        assert ulp(1.5, BF16) == 2.0 ** -7

    def test_matches_adjacent_saturated_scores(self):
        # consecutive representable values just below 1.0 differ by one ulp
        assert 0.99609375 - 0.99218750 == ulp(0.75, BF16)
        assert 1.0 - 0.99609375 == ulp(0.75, BF16)

    def test_subnormal_and_zero(self):
        assert ulp(0.0, BF16) == BF16.subnormal_spacing
        assert ulp(BF16.min_normal / 2, BF16) == BF16.subnormal_spacing

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ulp(math.inf, BF16)


class TestQop:
    def test_increment_below_half_ulp_is_lost(self):
        assert qop(1.0, 2.0 ** -9, "add", BF16) == 1.0

    def test_exact_addition(self):
        assert qop(0.5, 0.5, "add", BF16) == 1.0

    def test_division(self):
        assert qop(1.0, 3.0, "div", BF16) == 0.333984375
        assert qop(1.0, 3.0, "div", BF16) == round_to_format(
            __import__("fractions").Fraction(1, 3), 8, 7)

    def test_ieee_specials(self):
        assert qop(1.0, 0.0, "div", BF16) == math.inf
        assert qop(-1.0, 0.0, "div", BF16) == -math.inf
        assert qop(1.0, -0.0, "div", BF16) == -math.inf
        assert math.isnan(qop(math.inf, math.inf, "sub", BF16))
        assert math.isnan(qop(0.0, 0.0, "div", BF16))

    def test_rejects_wide_formats(self):
        with pytest.raises(ValueError):
            qop(1.0, 1.0, "add", PrecisionFormat(8, 30))


class TestQfunc:
    def test_exp(self):
        assert qfunc(0.0, "exp", BF16) == 1.0
        assert qfunc(1.0, "exp", BF16) == 2.71875  # frozen from the reference
        assert qfunc(100.0, "exp", FP16) == math.inf

    def test_negate_and_sqrt(self):
        assert qfunc(0.30078125, "negate", BF16) == -0.30078125
        assert qfunc(4.0, "sqrt", BF16) == 2.0

    def test_unknown_function(self):
        with pytest.raises(ValueError):
            qfunc(1.0, "tanh", BF16)


finite_doubles = st.floats(allow_nan=False, allow_infinity=False, width=64)
small_formats = st.builds(PrecisionFormat,
                          st.integers(min_value=2, max_value=11),
                          st.integers(min_value=1, max_value=24))


@given(finite_doubles, small_formats)
def test_quantize_idempotent(x, fmt):
    q = quantize(x, fmt)
    if math.isfinite(q):
        assert quantize(q, fmt) == q


@given(finite_doubles, finite_doubles, small_formats)
def test_quantize_monotone(x, y, fmt):
    if x > y:
        x, y = y, x
    assert quantize(x, fmt) <= quantize(y, fmt)


@given(finite_doubles, small_formats)
@settings(max_examples=300)
def test_quantize_matches_rational_reference(x, fmt):
    got = quantize(x, fmt)
    want = round_to_format(x, fmt.exponent_bits, fmt.mantissa_bits)
    assert got == want or (got == want == 0.0)


@given(st.floats(min_value=1e-30, max_value=1e30))
def test_half_ulp_error_bound(x):
    assert abs(quantize(x, BF16) - x) <= ulp(x, BF16) / 2


@given(finite_doubles)
def test_grid_containment_bf16_in_fp32(x):
    q = quantize(x, BF16)
    if math.isfinite(q):
        assert quantize(q, FP32) == q


def test_fp32_agreement_sample():
    rng = np.random.default_rng(3)
    xs = rng.standard_normal(20_000) * np.exp(rng.uniform(-60, 60, 20_000))
    assert np.array_equal(quantize_array(xs, FP32),
                          xs.astype(np.float32).astype(np.float64))


def test_quantize_array_matches_scalar():
    rng = np.random.default_rng(4)
    xs = np.concatenate([
        rng.standard_normal(500) * 10.0 ** rng.integers(-42, 42, 500),
        [0.0, -0.0, 1e39, -1e39, 5e-41, np.inf, -np.inf, np.nan],
    ])
    for fmt in (BF16, FP16, FP32):
        arr = quantize_array(xs, fmt)
        ref = np.array([quantize(float(v), fmt) for v in xs])
        assert np.array_equal(arr, ref, equal_nan=True)
        signs = np.signbit(arr) == np.signbit(ref)
        assert signs.all()


class TestGrid:
    def test_values_near_one(self):
        assert grid_values(BF16, 0.99, 1.0) == [0.9921875, 0.99609375, 1.0]

    def test_fp32_much_denser(self):
        bf = len(grid_values(BF16, 0.99, 1.0))
        fp = len(grid_values(FP32, 0.99, 1.0, max_count=1 << 21))
        assert fp > 1000 * bf

    def test_zero_width(self):
        assert grid_values(BF16, 0.75, 0.75) == [0.75]
        assert grid_values(BF16, 0.751, 0.751) == []

    def test_spacing_in_upper_binade(self):
        values = grid_values(BF16, 0.5, 1.0)
        diffs = {round(b - a, 12) for a, b in zip(values, values[1:])}
        assert diffs == {2.0 ** -8}
        assert len(values) == 129

    def test_negative_and_zero(self):
        vals = grid_values(BF16, -0.02, 0.02)
        assert 0.0 in vals
        assert vals == sorted(vals)
        assert [-v for v in vals] == sorted([-v for v in vals], reverse=True)

    def test_budget_refusal(self):
        with pytest.raises(ValueError):
            grid_values(FP32, 0.0, 1.0, max_count=100)
