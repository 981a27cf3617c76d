from __future__ import annotations

import itertools
import math
from typing import Sequence, Tuple

import numpy as np

from src.aggregators import aggregate_additive, aggregate_multiplicative, compare_totals
from src.errors import NonPositiveLossError, TagMismatchError, UsageError
from src.loss_core import LOG_LOSS, RAW_LOSS, DomainTag, LossVector
from src.verdicts import RANK_ISOMORPHISM, AxiomVerdict, Counterexample, failed, passed

__all__ = [
    "DomainTag",
    "check_rank_preservation",
    "scale_above_one",
    "scale_raw_domain",
    "shift_log_domain",
    "shift_positive",
    "to_exp_domain",
    "to_log_domain",
]


def _non_positive_indices(values: np.ndarray) -> list[int]:
    return [int(i) for i in np.flatnonzero(values <= 0.0)]


def to_log_domain(losses: LossVector, base: float = math.e) -> LossVector:
    if losses.domain.tag != RAW_LOSS:
        raise TagMismatchError(f"expected raw losses, got domain={losses.domain.tag}")
    values = losses.as_array()
    bad = _non_positive_indices(values)
    if bad:
        raise NonPositiveLossError(bad)
    tag = DomainTag(tag=LOG_LOSS, log_base=base, shift_k=losses.domain.shift_k)
    logged = np.log(values) / math.log(base) if base != math.e else np.log(values)
    return losses.with_losses(logged, domain=tag)


def to_exp_domain(log_losses: LossVector, base: float = math.e) -> LossVector:
    if log_losses.domain.tag != LOG_LOSS:
        raise TagMismatchError(f"expected log losses, got domain={log_losses.domain.tag}")
    if log_losses.domain.log_base != base:
        raise TagMismatchError(
            f"log base mismatch tagged={log_losses.domain.log_base} requested={base}"
        )
    values = log_losses.as_array()
    raised = np.exp(values) if base == math.e else np.power(base, values)
    tag = DomainTag(tag=RAW_LOSS, log_base=base, shift_k=log_losses.domain.shift_k)
    return log_losses.with_losses(raised, domain=tag)


def shift_positive(losses: LossVector, margin: float = 1.0) -> Tuple[LossVector, float]:
    """Add the smallest k >= 0 that lifts every loss to at least `margin`.

    k stays 0 when every loss is already > 0.
    """
    if not margin > 0:
        raise UsageError(f"margin={margin} must be > 0")
    values = losses.as_array()
    if len(values) == 0:
        return losses, 0.0
    low = float(values.min())
    k = margin - low if low <= 0.0 else 0.0
    if k == 0.0:
        return losses, 0.0
    shifted = values + k
    tag = DomainTag(
        tag=losses.domain.tag,
        log_base=losses.domain.log_base,
        shift_k=losses.domain.shift_k + k,
    )
    return losses.with_losses(shifted, domain=tag), k


def scale_above_one(losses: LossVector, margin: float = 2.0) -> Tuple[LossVector, float]:
    if not margin > 1.0:
        raise UsageError(f"margin={margin} must be > 1")
    values = losses.as_array()
    bad = _non_positive_indices(values)
    if bad:
        raise NonPositiveLossError(bad)
    low = float(values.min())
    factor = margin / low if low < margin else 1.0
    if factor == 1.0:
        return losses, 1.0
    return losses.with_losses(values * factor), factor


def shift_log_domain(log_losses: LossVector, k: float) -> LossVector:
    if log_losses.domain.tag != LOG_LOSS:
        raise TagMismatchError(f"expected log losses, got domain={log_losses.domain.tag}")
    return log_losses.with_losses(log_losses.as_array() + k)


def scale_raw_domain(losses: LossVector, factor: float) -> LossVector:
    if losses.domain.tag != RAW_LOSS:
        raise TagMismatchError(f"expected raw losses, got domain={losses.domain.tag}")
    if not factor > 0:
        raise UsageError(f"factor={factor} must be > 0")
    return losses.with_losses(losses.as_array() * factor)


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def check_rank_preservation(
    loss_sets: Sequence[LossVector],
    base: float = math.e,
    rel_tol: float = 1e-9,
) -> AxiomVerdict:
    if len(loss_sets) < 2:
        raise UsageError(f"need >= 2 loss sets, got {len(loss_sets)}")

    products = [aggregate_multiplicative(s) for s in loss_sets]
    log_sums = []
    for i, s in enumerate(loss_sets):
        if products[i].degenerate:
            raise NonPositiveLossError(_non_positive_indices(s.as_array()))
        log_sums.append(aggregate_additive(to_log_domain(s, base=base)).value)

    # Equal within rel_tol in the raw domain is equal within log_b(1 + rel_tol) here.
    log_tol = math.log1p(rel_tol) / math.log(base)
    trials = 0
    for i, j in itertools.combinations(range(len(loss_sets)), 2):
        trials += 1
        product_order = compare_totals(products[i], products[j], rel_tol=rel_tol)
        diff = log_sums[i] - log_sums[j]
        additive_order = 0 if abs(diff) <= log_tol else _sign(diff)
        if product_order != additive_order:
            return failed(
                RANK_ISOMORPHISM,
                trials=trials,
                counterexample=Counterexample(
                    original=loss_sets[i].losses,
                    perturbed=loss_sets[j].losses,
                    total_before=log_sums[i],
                    total_after=log_sums[j],
                    note="product ranking and log-sum ranking disagree",
                    context={
                        "product_order": product_order,
                        "log_sum_order": additive_order,
                        "base": base,
                    },
                ),
            )
    return passed(RANK_ISOMORPHISM, trials=trials)
