from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.aggregators import (
    ASCENDING,
    DESCENDING,
    LTYPE,
    MULTIPLICATIVE,
    QUANTILE,
    AggregatorSpec,
    TotalLossResult,
    aggregate,
    aggregate_ltype,
    aggregate_quantile,
    order_key,
    quantile_index,
    strictly_increased,
    total_key,
)
from src.errors import (
    LengthMismatchError,
    NoNonMaximalLossError,
    NonPositiveLossError,
    NoSlackPositionError,
    UsageError,
    ZeroActualError,
)
from src.loss_core import IndividualLossSpec, LossVector, eval_loss_array
from src.verdicts import (
    ANONYMITY,
    FISHER_CONSISTENCY,
    TOTAL_MONOTONICITY,
    AxiomVerdict,
    Counterexample,
    failed,
    passed,
)

DELTA = "delta"
EPSILON = "epsilon"

KIND_ANONYMITY = "anonymity"
KIND_MONOTONICITY = "monotonicity"

AggregateFn = Callable[[LossVector], TotalLossResult]


@dataclass(frozen=True)
class Perturbation:
    # EPSILON raises keep the raised loss strictly below the maximum.
    index: int
    amount: float
    kind: str = DELTA

    def __post_init__(self) -> None:
        if self.kind not in (DELTA, EPSILON):
            raise UsageError(f"unknown_perturbation_kind={self.kind}")
        if not (math.isfinite(self.amount) and self.amount > 0):
            raise UsageError(f"perturbation amount={self.amount} must be finite and > 0")

    def apply(self, losses: LossVector) -> LossVector:
        if not 0 <= self.index < len(losses):
            raise UsageError(f"perturbation index={self.index} out of range n={len(losses)}")
        values = list(losses.losses)
        raised = values[self.index] + self.amount
        if self.kind == EPSILON and not raised < max(values):
            raise UsageError(
                f"epsilon={self.amount} lifts index={self.index} to the maximum {max(values)}"
            )
        values[self.index] = raised
        return losses.with_losses(values)


def _aggregate_fn(spec: AggregatorSpec, aggregate_fn: Optional[AggregateFn]) -> AggregateFn:
    if aggregate_fn is not None:
        return aggregate_fn
    return lambda lv: aggregate(lv, spec)


def _fingerprint(result: TotalLossResult) -> tuple:
    def bits(x: Optional[float]) -> Optional[str]:
        return None if x is None else float(x).hex()

    return (
        bits(result.value),
        result.value_state,
        bits(result.log_value),
        result.log_state,
        result.degenerate,
    )


def verify_anonymity(
    spec: AggregatorSpec,
    losses: LossVector,
    n_permutations: int,
    seed: int = 0,
    aggregate_fn: Optional[AggregateFn] = None,
) -> AxiomVerdict:
    if n_permutations < 1:
        raise UsageError(f"n_permutations={n_permutations} must be >= 1")
    agg = _aggregate_fn(spec, aggregate_fn)
    baseline = agg(losses)
    expected = _fingerprint(baseline)
    n = len(losses)

    if math.factorial(n) <= n_permutations:
        orders = (list(p) for p in itertools.permutations(range(n)))
    else:
        rng = np.random.default_rng(seed)
        orders = (rng.permutation(n).tolist() for _ in range(n_permutations))

    trials = 0
    for order in orders:
        trials += 1
        shuffled = LossVector(losses=tuple(losses.losses[i] for i in order))
        result = agg(shuffled)
        if _fingerprint(result) != expected:
            return failed(
                ANONYMITY,
                trials=trials,
                seed=seed,
                counterexample=Counterexample(
                    original=losses.losses,
                    perturbed=shuffled.losses,
                    total_before=total_key(baseline),
                    total_after=total_key(result),
                    note="permuting the losses changed the total",
                    spec=None if aggregate_fn is not None else spec,
                    context={"kind": KIND_ANONYMITY, "permutation": order},
                ),
            )
    return passed(ANONYMITY, trials=trials, seed=seed)


def verify_total_monotonicity(
    spec: AggregatorSpec,
    losses: LossVector,
    perturbations: Sequence[Perturbation],
    aggregate_fn: Optional[AggregateFn] = None,
    rel_tol: float = 1e-12,
    seed: Optional[int] = None,
) -> AxiomVerdict:
    if not perturbations:
        raise UsageError("need at least one perturbation")
    if spec.kind == MULTIPLICATIVE:
        bad = [i for i, x in enumerate(losses.losses) if x <= 0.0]
        if bad:
            raise NonPositiveLossError(bad)

    agg = _aggregate_fn(spec, aggregate_fn)
    before = agg(losses)
    for trial, perturbation in enumerate(perturbations, start=1):
        raised = perturbation.apply(losses)
        after = agg(raised)
        if not strictly_increased(before, after, rel_tol=rel_tol):
            return failed(
                TOTAL_MONOTONICITY,
                trials=trial,
                seed=seed,
                counterexample=Counterexample(
                    original=losses.losses,
                    perturbed=raised.losses,
                    total_before=total_key(before),
                    total_after=total_key(after),
                    note="raising one loss did not strictly raise the total",
                    spec=None if aggregate_fn is not None else spec,
                    context={
                        "kind": KIND_MONOTONICITY,
                        "index": perturbation.index,
                        "amount": perturbation.amount,
                        "perturbation": perturbation.kind,
                    },
                ),
            )
    return passed(TOTAL_MONOTONICITY, trials=len(perturbations), seed=seed)


def random_perturbations(
    losses: LossVector,
    count: int,
    rng: np.random.Generator,
) -> List[Perturbation]:
    n = len(losses)
    perturbations = []
    for _ in range(count):
        index = int(rng.integers(n))
        scale = max(abs(losses.losses[index]), 1.0)
        perturbations.append(Perturbation(index=index, amount=scale * float(rng.uniform(1e-3, 1.0))))
    return perturbations


def _epsilon_below_max(values: Sequence[float]) -> Optional[Perturbation]:
    top = max(values)
    candidates = sorted(
        (i for i, x in enumerate(values) if x < top),
        key=lambda i: (-values[i], i),
    )
    for i in candidates:
        eps = (top - values[i]) / 2.0
        if eps > 0 and values[i] < values[i] + eps < top:
            return Perturbation(index=i, amount=eps, kind=EPSILON)
    return None


def lemma1_counterexample(q: float, losses: LossVector) -> Counterexample:
    """Build a loss raise that leaves the q-quantile total unchanged.

    For q < 1 the maximum is raised by 1. When ceil(q*n) = n the quantile is the
    maximum itself, so (as for q = 1) a non-maximal loss is raised by half its gap
    to the maximum instead.
    """
    n = len(losses)
    k = quantile_index(q, max(n, 1))
    values = list(losses.losses)

    if q < 1.0 and k < n:
        index = int(np.argsort(np.asarray(values), kind="stable")[-1])
        perturbation = Perturbation(index=index, amount=1.0)
        case = "raise_maximum"
    else:
        found = _epsilon_below_max(values) if n else None
        if found is None:
            raise NoNonMaximalLossError(f"no loss below the maximum in {values}")
        perturbation = found
        case = "raise_below_maximum"

    raised = perturbation.apply(losses)
    before = aggregate_quantile(losses, q)
    after = aggregate_quantile(raised, q)
    return Counterexample(
        original=losses.losses,
        perturbed=raised.losses,
        total_before=total_key(before),
        total_after=total_key(after),
        note=f"quantile total unchanged after {case}",
        spec=AggregatorSpec(kind=QUANTILE, q=q),
        context={
            "kind": KIND_MONOTONICITY,
            "case": case,
            "index": perturbation.index,
            "amount": perturbation.amount,
        },
    )


def ltype_counterexample(
    coefficients: Sequence[float],
    order: str,
    losses: LossVector,
) -> Counterexample:
    spec = AggregatorSpec(kind=LTYPE, coefficients=tuple(coefficients), order=order)
    n = len(losses)
    if len(spec.coefficients) != n:
        raise LengthMismatchError(expected=n, got=len(spec.coefficients))

    ranked = np.argsort(losses.as_array(), kind="stable")
    ascending = losses.as_array()[ranked]
    zero_positions = [j for j, c in enumerate(spec.coefficients) if c == 0.0]
    if order == DESCENDING:
        zero_positions = [n - 1 - j for j in zero_positions]

    perturbation = None
    for pos in sorted(zero_positions):
        current = float(ascending[pos])
        if pos == n - 1:
            amount = 1.0
        else:
            amount = (float(ascending[pos + 1]) - current) / 2.0
            if not (amount > 0 and current < current + amount < float(ascending[pos + 1])):
                continue
        perturbation = Perturbation(index=int(ranked[pos]), amount=amount)
        break

    if perturbation is None:
        raise NoSlackPositionError(
            "no zero-weighted sorted position can be raised without changing rank"
        )

    raised = perturbation.apply(losses)
    before = aggregate_ltype(losses, spec.coefficients, order)
    after = aggregate_ltype(raised, spec.coefficients, order)
    return Counterexample(
        original=losses.losses,
        perturbed=raised.losses,
        total_before=total_key(before),
        total_after=total_key(after),
        note="L-type total unchanged after raising a zero-weighted loss",
        spec=spec,
        context={
            "kind": KIND_MONOTONICITY,
            "index": perturbation.index,
            "amount": perturbation.amount,
        },
    )


def recheck_counterexample(counterexample: Counterexample, rel_tol: float = 1e-12) -> bool:
    if counterexample.spec is None:
        raise UsageError("counterexample has no aggregator spec to re-run")
    before = aggregate(LossVector.of(counterexample.original), counterexample.spec)
    after = aggregate(LossVector.of(counterexample.perturbed), counterexample.spec)
    if total_key(before) != counterexample.total_before:
        return False
    if total_key(after) != counterexample.total_after:
        return False
    if counterexample.context.get("kind") == KIND_ANONYMITY:
        return _fingerprint(before) != _fingerprint(after)
    return not strictly_increased(before, after, rel_tol=rel_tol)


def verify_fisher_consistency(
    loss_spec: IndividualLossSpec,
    agg_spec: AggregatorSpec,
    actuals: Sequence[float],
    n_trials: int,
    perturbation_scale: float = 0.5,
    seed: int = 0,
) -> AxiomVerdict:
    """Sample perturbed prediction vectors and check none beats the perfect one.

    Each coordinate is scaled by 1 + u with perturbation_scale/1000 <= |u| <=
    perturbation_scale. The perturbed total must be >= the total at P = A, and
    strictly greater when every coordinate moved, or when any moved and the
    aggregator is strictly monotone.
    """
    if n_trials < 1:
        raise UsageError(f"n_trials={n_trials} must be >= 1")
    if not perturbation_scale > 0:
        raise UsageError(f"perturbation_scale={perturbation_scale} must be > 0")
    truth = np.asarray(actuals, dtype=np.float64)
    if loss_spec.is_percentage and np.any(truth <= 0):
        raise ZeroActualError()

    base_losses = eval_loss_array(loss_spec, truth, truth)
    base = aggregate(base_losses, agg_spec)
    base_key = total_key(base)
    strict_if_any = agg_spec.admissible and agg_spec.kind != MULTIPLICATIVE

    rng = np.random.default_rng(seed)
    n = len(truth)
    for trial in range(1, n_trials + 1):
        magnitude = rng.uniform(perturbation_scale * 1e-3, perturbation_scale, n)
        sign = rng.choice(np.array([-1.0, 1.0]), n)
        predictions = np.maximum(truth * (1.0 + sign * magnitude), 0.0)
        moved = predictions != truth
        trial_losses = eval_loss_array(loss_spec, predictions, truth)
        result = aggregate(trial_losses, agg_spec)

        if bool(moved.all()) or (strict_if_any and bool(moved.any())):
            ok = strictly_increased(base, result, rel_tol=0.0)
        else:
            ok = order_key(result) >= order_key(base)
        if not ok:
            return failed(
                FISHER_CONSISTENCY,
                trials=trial,
                seed=seed,
                counterexample=Counterexample(
                    original=base_losses.losses,
                    perturbed=trial_losses.losses,
                    total_before=base_key,
                    total_after=total_key(result),
                    note="a perturbed prediction set scored at or below the perfect one",
                    spec=agg_spec,
                    context={"kind": KIND_MONOTONICITY, "predictions": predictions.tolist()},
                ),
            )
    return passed(FISHER_CONSISTENCY, trials=n_trials, seed=seed)


__all__ = [
    "ASCENDING",
    "DELTA",
    "DESCENDING",
    "EPSILON",
    "Perturbation",
    "lemma1_counterexample",
    "ltype_counterexample",
    "random_perturbations",
    "recheck_counterexample",
    "verify_anonymity",
    "verify_fisher_consistency",
    "verify_total_monotonicity",
]
