from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.aggregators import (
    ADDITIVE,
    ASCENDING,
    DESCENDING,
    LTYPE,
    MULTIPLICATIVE,
    NEG_INF,
    POS_INF,
    PRESETS,
    QUANTILE,
    T_GEOMEAN,
    T_LOG,
    T_MEAN,
    T_ROOT,
    T_SCALE,
    AggregatorSpec,
    TransformSpec,
    aggregate,
    aggregate_additive,
    aggregate_ltype,
    aggregate_multiplicative,
    aggregate_quantile,
    apply_transforms,
    compare_totals,
    order_key,
    preset_metric,
    quantile_index,
    quantile_selector_coefficients,
    strictly_increased,
    trimmed_coefficients,
)
from src.errors import (
    EmptyVectorError,
    InvalidSpecError,
    LengthMismatchError,
    LogOfNonPositiveError,
    NegativeCoefficientError,
    QOutOfRangeError,
)
from src.loss_core import LossVector, PredictionRecord

positive_losses = st.lists(st.floats(min_value=0.01, max_value=1e3), min_size=1, max_size=40)


class TestAdditive:
    def test_sum(self):
        assert aggregate_additive(LossVector.of([10.0, 5.0])).value == 15.0

    def test_single_and_zero(self):
        assert aggregate_additive(LossVector.of([0.0])).value == 0.0
        assert aggregate_additive(LossVector.of([7.0])).value == 7.0

    def test_empty(self):
        with pytest.raises(EmptyVectorError):
            aggregate_additive(LossVector.of([]))

    def test_order_independent_bits(self):
        values = [0.1, 1e16, 3.3, 1e-8, 2.2]
        a = aggregate_additive(LossVector.of(values)).value
        b = aggregate_additive(LossVector.of(list(reversed(values)))).value
        assert a.hex() == b.hex()

    def test_sum_past_double_range_marks_plus_inf(self):
        result = aggregate_additive(LossVector.of([1e308, 1e308]))
        assert result.value is None
        assert result.value_state == POS_INF
        assert result.value_text() == "+inf"
        assert result.log_value == pytest.approx(math.log(1e308) + math.log(2.0), rel=1e-12)

    def test_mean_brings_overflowed_sum_back(self):
        spec = AggregatorSpec(kind=ADDITIVE, transform=(TransformSpec(T_MEAN),))
        result = aggregate(LossVector.of([1e308, 1e308]), spec)
        assert result.value_state != POS_INF
        assert result.value == pytest.approx(1e308, rel=1e-9)

    def test_scale_past_double_range_switches_to_log(self):
        spec = AggregatorSpec(kind=ADDITIVE, transform=(TransformSpec(T_SCALE, 1e10),))
        result = aggregate(LossVector.of([1e300]), spec)
        assert result.value_state == POS_INF
        assert result.log_value == pytest.approx(math.log(1e300) + math.log(1e10), rel=1e-12)


class TestMultiplicative:
    def test_product(self):
        result = aggregate_multiplicative(LossVector.of([2.0, 3.0, 4.0]))
        assert result.value == pytest.approx(24.0, rel=1e-12)
        assert result.log_value == pytest.approx(math.log(24.0), rel=1e-12)
        assert not result.degenerate

    def test_zero_loss_is_degenerate(self):
        result = aggregate_multiplicative(LossVector.of([5.0, 0.0, 7.0]))
        assert result.value == 0.0
        assert result.degenerate
        assert result.log_state == NEG_INF

    def test_underflow_stays_in_log_space(self):
        result = aggregate_multiplicative(LossVector.of([1e-200] * 3))
        assert result.log_value == pytest.approx(3 * math.log(1e-200))
        assert not result.degenerate

    def test_overflow_marks_plus_inf(self):
        result = aggregate_multiplicative(LossVector.of([1e200] * 3))
        assert result.value is None
        assert result.value_state == POS_INF
        assert result.value_text() == "+inf"
        assert result.log_value == pytest.approx(3 * math.log(1e200))


class TestQuantile:
    def test_median_example(self):
        assert aggregate_quantile(LossVector.of([1, 2, 3, 4, 5]), 0.5).value == 3.0

    def test_max_example(self):
        assert aggregate_quantile(LossVector.of([1, 2, 3, 4, 5]), 1.0).value == 5.0

    def test_no_interpolation(self):
        assert aggregate_quantile(LossVector.of([10.0, 5.0]), 0.5).value == 5.0

    def test_q_range(self):
        for q in (0.0, 1.5, -0.1, math.nan):
            with pytest.raises(QOutOfRangeError):
                aggregate_quantile(LossVector.of([1.0]), q)

    def test_index_rounding(self):
        assert quantile_index(0.7, 10) == 7
        assert quantile_index(0.25, 5) == 2
        assert quantile_index(1.0, 9) == 9
        assert quantile_index(0.001, 3) == 1

    @settings(max_examples=100, deadline=None)
    @given(positive_losses, st.floats(min_value=0.01, max_value=1.0))
    def test_matches_sort_and_index(self, values, q):
        expected = sorted(values)[math.ceil(round(q * len(values), 9)) - 1]
        assert aggregate_quantile(LossVector.of(values), q).value == expected


class TestLType:
    def test_worked_example(self):
        result = aggregate_ltype(LossVector.of([3.0, 1.0, 2.0]), [1.0, 0.0, 2.0], ASCENDING)
        assert result.value == 7.0

    def test_descending(self):
        result = aggregate_ltype(LossVector.of([3.0, 1.0, 2.0]), [1.0, 0.0, 2.0], DESCENDING)
        assert result.value == 5.0

    def test_weighted_sum_past_double_range(self):
        result = aggregate_ltype(LossVector.of([1e308, 1e308]), [2.0, 2.0])
        assert result.value_state == POS_INF
        assert result.log_value == pytest.approx(math.log(1e308) + math.log(4.0), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            aggregate_ltype(LossVector.of([1.0, 2.0]), [1.0, 1.0, 1.0])

    def test_negative_coefficient(self):
        with pytest.raises(NegativeCoefficientError):
            aggregate_ltype(LossVector.of([1.0, 2.0]), [1.0, -1.0])

    def test_admissibility(self):
        assert AggregatorSpec(kind=LTYPE, coefficients=(1.0, 0.5)).admissible
        assert not AggregatorSpec(kind=LTYPE, coefficients=(1.0, 0.0)).admissible
        assert not AggregatorSpec(kind=QUANTILE, q=0.5).admissible
        assert AggregatorSpec(kind=ADDITIVE).admissible
        assert AggregatorSpec(kind=MULTIPLICATIVE).admissible

    def test_trimmed_coefficients(self):
        assert trimmed_coefficients(10, 0.2) == (0.0, 0.0) + (1.0,) * 6 + (0.0, 0.0)
        with pytest.raises(InvalidSpecError):
            trimmed_coefficients(10, 0.5)

    @settings(max_examples=100, deadline=None)
    @given(positive_losses)
    def test_unit_coefficients_equal_additive(self, values):
        lv = LossVector.of(values)
        ones = [1.0] * len(values)
        assert aggregate_ltype(lv, ones).value == aggregate_additive(lv).value

    @settings(max_examples=100, deadline=None)
    @given(positive_losses, st.floats(min_value=0.01, max_value=1.0))
    def test_selector_equals_quantile(self, values, q):
        lv = LossVector.of(values)
        selector = quantile_selector_coefficients(q, len(values))
        assert aggregate_ltype(lv, selector).value == aggregate_quantile(lv, q).value


class TestTransforms:
    def test_mean_and_root(self):
        spec = AggregatorSpec(
            kind=ADDITIVE, transform=(TransformSpec(T_MEAN), TransformSpec(T_ROOT, 2.0))
        )
        assert aggregate(LossVector.of([100.0, 100.0]), spec).value == 10.0

    def test_geomean_in_log_space(self):
        spec = AggregatorSpec(kind=MULTIPLICATIVE, transform=(TransformSpec(T_GEOMEAN),))
        result = aggregate(LossVector.of([2.0, 8.0]), spec)
        assert result.value == pytest.approx(4.0, rel=1e-12)

    def test_degenerate_survives_transforms(self):
        spec = AggregatorSpec(kind=MULTIPLICATIVE, transform=(TransformSpec(T_GEOMEAN),))
        result = aggregate(LossVector.of([0.0, 8.0]), spec)
        assert result.value == 0.0 and result.degenerate

    def test_log_of_zero(self):
        spec = AggregatorSpec(kind=ADDITIVE, transform=(TransformSpec(T_LOG, 10.0),))
        with pytest.raises(LogOfNonPositiveError):
            aggregate(LossVector.of([0.0, 0.0]), spec)

    def test_log_base(self):
        spec = AggregatorSpec(kind=ADDITIVE, transform=(TransformSpec(T_LOG, 10.0),))
        assert aggregate(LossVector.of([40.0, 60.0]), spec).value == pytest.approx(2.0)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidSpecError):
            TransformSpec(T_ROOT)
        with pytest.raises(InvalidSpecError):
            TransformSpec(T_LOG, 1.0)
        with pytest.raises(InvalidSpecError):
            TransformSpec(T_MEAN, 2.0)

    @settings(max_examples=100, deadline=None)
    @given(positive_losses, positive_losses)
    def test_transforms_preserve_order(self, xs, ys):
        if len(xs) != len(ys):
            ys = (ys * len(xs))[: len(xs)]
        base = AggregatorSpec(kind=ADDITIVE)
        raw = compare_totals(
            aggregate(LossVector.of(xs), base), aggregate(LossVector.of(ys), base), rel_tol=0.0
        )
        for step in (TransformSpec(T_MEAN), TransformSpec(T_SCALE, 3.0), TransformSpec(T_ROOT, 2.0)):
            spec = base.with_transform(step)
            shown = compare_totals(
                aggregate(LossVector.of(xs), spec), aggregate(LossVector.of(ys), spec), rel_tol=0.0
            )
            # Rounding may merge two nearly equal totals but never swaps them.
            assert shown in (raw, 0)

    def test_chain_equals_steps(self):
        raw = aggregate_additive(LossVector.of([4.0, 16.0]))
        chained = apply_transforms(raw, (TransformSpec(T_MEAN), TransformSpec(T_ROOT, 2.0)))
        assert chained.value == pytest.approx(math.sqrt(10.0), rel=1e-15)


class TestComparisons:
    def test_compare_with_degenerate(self):
        zero = aggregate_multiplicative(LossVector.of([0.0, 1.0]))
        small = aggregate_multiplicative(LossVector.of([1e-300, 1e-300]))
        assert compare_totals(zero, small) == -1
        assert compare_totals(zero, zero) == 0
        assert strictly_increased(zero, small)
        assert not strictly_increased(zero, zero)

    def test_tie_tolerance(self):
        a = aggregate_additive(LossVector.of([1.0]))
        b = aggregate_additive(LossVector.of([1.0 + 1e-12]))
        assert compare_totals(a, b, rel_tol=1e-9) == 0
        assert strictly_increased(a, b, rel_tol=0.0)

    def test_order_key_places_plus_inf_above_finite(self):
        zero = aggregate_multiplicative(LossVector.of([0.0, 1.0]))
        finite = aggregate_additive(LossVector.of([1e308]))
        huge = aggregate_additive(LossVector.of([1e308, 1e308]))
        huger = aggregate_additive(LossVector.of([1e308, 1e308, 1e308]))
        assert sorted([huger, finite, huge, zero], key=order_key) == [zero, finite, huge, huger]
        assert compare_totals(finite, huge) == -1
        assert strictly_increased(finite, huge)
        assert strictly_increased(huge, huger)


class TestPresets:
    def _records(self):
        return [
            PredictionRecord("a", 100.0, {"p1": 110.0}),
            PredictionRecord("b", 200.0, {"p1": 190.0}),
        ]

    def test_mape(self):
        assert preset_metric("MAPE", self._records(), "p1").value == 7.5

    def test_rmse(self):
        assert preset_metric("rmse", self._records(), "p1").value == 10.0

    def test_medape(self):
        assert preset_metric("MEDAPE", self._records(), "p1").value == 5.0

    def test_mae_and_maxape(self):
        assert preset_metric("MAE", self._records(), "p1").value == 10.0
        assert preset_metric("MAXAPE", self._records(), "p1").value == 10.0

    def test_unknown(self):
        with pytest.raises(InvalidSpecError):
            preset_metric("SMAPE", self._records(), "p1")

    def test_preset_table_complete(self):
        assert {"MAPE", "MEDAPE", "RMSE", "GMAPE"} <= set(PRESETS)


def test_naive_product_oracle():
    rng = np.random.default_rng(7)
    for _ in range(500):
        values = rng.uniform(0.5, 2.0, int(rng.integers(1, 21))).tolist()
        naive = 1.0
        for v in values:
            naive *= v
        assert aggregate_multiplicative(LossVector.of(values)).value == pytest.approx(naive, rel=1e-9)
