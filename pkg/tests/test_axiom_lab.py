from __future__ import annotations

import numpy as np
import pytest

from src.aggregators import (
    ADDITIVE,
    ASCENDING,
    DESCENDING,
    LTYPE,
    MULTIPLICATIVE,
    QUANTILE,
    AggregatorSpec,
    TotalLossResult,
    aggregate,
)
from src.axiom_lab import (
    EPSILON,
    Perturbation,
    lemma1_counterexample,
    ltype_counterexample,
    random_perturbations,
    recheck_counterexample,
    verify_anonymity,
    verify_fisher_consistency,
    verify_total_monotonicity,
)
from src.errors import (
    NoNonMaximalLossError,
    NonPositiveLossError,
    NoSlackPositionError,
    UsageError,
)
from src.loss_core import ABSOLUTE_PERCENTAGE_ERROR, SQUARED_ERROR, IndividualLossSpec, LossVector
from src.verdicts import ANONYMITY, FAIL, FISHER_CONSISTENCY, PASS, TOTAL_MONOTONICITY


class TestPerturbation:
    def test_apply_raises_one_loss(self):
        raised = Perturbation(index=1, amount=2.0).apply(LossVector.of([1.0, 1.0, 5.0]))
        assert raised.losses == (1.0, 3.0, 5.0)

    def test_epsilon_must_stay_below_max(self):
        with pytest.raises(UsageError):
            Perturbation(index=0, amount=4.0, kind=EPSILON).apply(LossVector.of([1.0, 5.0]))

    def test_amount_positive(self):
        with pytest.raises(UsageError):
            Perturbation(index=0, amount=0.0)


class TestAnonymity:
    def test_builtins_pass(self):
        losses = LossVector.of([3.0, 1.0, 2.0, 7.5, 0.25])
        for spec in (
            AggregatorSpec(kind=ADDITIVE),
            AggregatorSpec(kind=MULTIPLICATIVE),
            AggregatorSpec(kind=QUANTILE, q=0.5),
            AggregatorSpec(kind=LTYPE, coefficients=(1.0, 0.0, 2.0, 0.5, 1.0)),
        ):
            verdict = verify_anonymity(spec, losses, n_permutations=200, seed=3)
            assert verdict.status == PASS
            assert verdict.trials == 120

    def test_position_weighted_total_fails(self):
        spec = AggregatorSpec(kind=ADDITIVE)

        def first_unit_counts_double(lv: LossVector) -> TotalLossResult:
            base = aggregate(lv, spec)
            return TotalLossResult(
                value=base.value + lv.losses[0],
                log_value=None,
                degenerate=False,
                n_units=base.n_units,
                spec_echo=spec,
            )

        verdict = verify_anonymity(
            spec, LossVector.of([1.0, 2.0, 3.0]), n_permutations=10, aggregate_fn=first_unit_counts_double
        )
        assert verdict.status == FAIL
        assert verdict.axiom == ANONYMITY
        assert sorted(verdict.counterexample.perturbed) == [1.0, 2.0, 3.0]


class TestMonotonicity:
    def test_additive_passes(self):
        rng = np.random.default_rng(0)
        losses = LossVector.of(rng.uniform(0.1, 5.0, 12).tolist())
        verdict = verify_total_monotonicity(
            AggregatorSpec(kind=ADDITIVE), losses, random_perturbations(losses, 50, rng)
        )
        assert verdict.passed
        assert verdict.trials == 50

    def test_median_fails_when_max_raised(self):
        verdict = verify_total_monotonicity(
            AggregatorSpec(kind=QUANTILE, q=0.5),
            LossVector.of([1.0, 2.0, 3.0, 4.0, 5.0]),
            [Perturbation(index=4, amount=1.0)],
        )
        assert verdict.status == FAIL
        assert verdict.axiom == TOTAL_MONOTONICITY
        assert verdict.counterexample.total_before == verdict.counterexample.total_after == 3.0
        assert recheck_counterexample(verdict.counterexample)

    def test_multiplicative_requires_positive_losses(self):
        with pytest.raises(NonPositiveLossError):
            verify_total_monotonicity(
                AggregatorSpec(kind=MULTIPLICATIVE),
                LossVector.of([0.0, 1.0]),
                [Perturbation(index=1, amount=1.0)],
            )


class TestLemma1:
    def test_median_raises_maximum(self):
        cx = lemma1_counterexample(0.5, LossVector.of([1.0, 2.0, 3.0, 4.0, 5.0]))
        assert cx.perturbed == (1.0, 2.0, 3.0, 4.0, 6.0)
        assert cx.total_before == cx.total_after == 3.0
        assert recheck_counterexample(cx)

    def test_max_uses_epsilon(self):
        cx = lemma1_counterexample(1.0, LossVector.of([1.0, 2.0, 5.0]))
        assert cx.perturbed == (1.0, 3.5, 5.0)
        assert cx.total_before == cx.total_after == 5.0

    def test_all_equal_median(self):
        cx = lemma1_counterexample(0.5, LossVector.of([4.0, 4.0, 4.0]))
        assert sorted(cx.perturbed) == [4.0, 4.0, 5.0]
        assert cx.total_before == cx.total_after == 4.0

    def test_all_equal_max(self):
        with pytest.raises(NoNonMaximalLossError):
            lemma1_counterexample(1.0, LossVector.of([4.0, 4.0, 4.0]))

    def test_quantile_at_top_falls_back(self):
        # ceil(0.9 * 5) = 5, so the 0.9-quantile is the maximum here.
        cx = lemma1_counterexample(0.9, LossVector.of([1.0, 2.0, 3.0, 4.0, 5.0]))
        assert cx.context["case"] == "raise_below_maximum"
        assert recheck_counterexample(cx)


class TestLTypeCounterexample:
    def test_zero_coefficient(self):
        cx = ltype_counterexample([1.0, 0.0, 1.0], ASCENDING, LossVector.of([1.0, 2.0, 4.0]))
        assert cx.perturbed == (1.0, 3.0, 4.0)
        assert cx.total_before == cx.total_after == 5.0
        assert recheck_counterexample(cx)

    def test_descending_top_zero(self):
        cx = ltype_counterexample([0.0, 1.0, 1.0], DESCENDING, LossVector.of([1.0, 2.0, 4.0]))
        assert cx.perturbed == (1.0, 2.0, 5.0)
        assert recheck_counterexample(cx)

    def test_no_zero_coefficient(self):
        with pytest.raises(NoSlackPositionError):
            ltype_counterexample([1.0, 1.0], ASCENDING, LossVector.of([1.0, 2.0]))


class TestFisher:
    @pytest.mark.parametrize("kind", [ABSOLUTE_PERCENTAGE_ERROR, SQUARED_ERROR])
    @pytest.mark.parametrize(
        "spec",
        [
            AggregatorSpec(kind=ADDITIVE),
            AggregatorSpec(kind=MULTIPLICATIVE),
            AggregatorSpec(kind=QUANTILE, q=0.5),
            AggregatorSpec(kind=QUANTILE, q=1.0),
            AggregatorSpec(kind=LTYPE, coefficients=tuple([0.5] * 20)),
        ],
        ids=lambda s: s.label(),
    )
    def test_truth_is_strict_minimum(self, kind, spec):
        actuals = np.random.default_rng(11).uniform(10.0, 1000.0, 20).tolist()
        verdict = verify_fisher_consistency(
            IndividualLossSpec(kind=kind), spec, actuals, n_trials=300, seed=5
        )
        assert verdict.axiom == FISHER_CONSISTENCY
        assert verdict.passed

    def test_zero_weight_total_fails(self):
        zero = AggregatorSpec(kind=LTYPE, coefficients=(0.0, 0.0))
        verdict = verify_fisher_consistency(
            IndividualLossSpec(kind=SQUARED_ERROR), zero, [10.0, 20.0], n_trials=5
        )
        assert verdict.status == FAIL
        assert verdict.counterexample.total_after == 0.0

    def test_trials_must_be_positive(self):
        with pytest.raises(UsageError):
            verify_fisher_consistency(
                IndividualLossSpec(kind=SQUARED_ERROR), AggregatorSpec(kind=ADDITIVE), [1.0], n_trials=0
            )
