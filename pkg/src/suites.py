from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from src.aggregators import (
    ADDITIVE,
    ASCENDING,
    DESCENDING,
    LTYPE,
    MULTIPLICATIVE,
    PRESETS,
    QUANTILE,
    T_GEOMEAN,
    T_LOG,
    T_MEAN,
    T_NONE,
    T_ROOT,
    T_SCALE,
    AggregatorSpec,
    TransformSpec,
    aggregate,
    aggregate_additive,
    aggregate_multiplicative,
    total_key,
    trimmed_coefficients,
)
from src.axiom_lab import (
    Perturbation,
    lemma1_counterexample,
    ltype_counterexample,
    random_perturbations,
    recheck_counterexample,
    verify_anonymity,
    verify_fisher_consistency,
    verify_total_monotonicity,
)
from src.isomorphism import check_rank_preservation, shift_positive, to_log_domain
from src.logger import log_event
from src.loss_core import (
    ABSOLUTE_PERCENTAGE_ERROR,
    LOSS_KINDS,
    SQUARED_ERROR,
    IndividualLossSpec,
    LossVector,
    check_pointwise_monotonicity,
    eval_loss_array,
)
from src.verdicts import (
    FAIL,
    PASS,
    RANK_ISOMORPHISM,
    TOTAL_MONOTONICITY,
    AxiomVerdict,
    Counterexample,
    failed,
    passed,
)


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 0
    trials: int = 200
    fisher_trials: int = 1000
    perturbation_scale: float = 0.5
    strict_rel_tol: float = 1e-12
    log_base: float = math.e
    shift_margin: float = 1.0


@dataclass(frozen=True)
class SuiteOutcome:
    suite: str
    expected: str
    verdicts: Tuple[AxiomVerdict, ...]
    met: bool
    detail: str = ""


def _random_losses(
    rng: np.random.Generator, n_low: int, n_high: int, low: float = 0.0, high: float = 10.0
) -> LossVector:
    n = int(rng.integers(n_low, n_high + 1))
    return LossVector.of(rng.uniform(low, high, n).tolist())


def _positive_ltype(rng: np.random.Generator, n: int, order: str = ASCENDING) -> AggregatorSpec:
    return AggregatorSpec(
        kind=LTYPE, coefficients=tuple(rng.uniform(0.1, 2.0, n).tolist()), order=order
    )


def _first_failure_or_pass(
    axiom: str, verdicts: Sequence[AxiomVerdict], seed: int, detail: str
) -> AxiomVerdict:
    for verdict in verdicts:
        if not verdict.passed:
            return replace(verdict, seed=seed, detail=detail)
    return passed(axiom, trials=sum(v.trials for v in verdicts), seed=seed, detail=detail)


def _expect_pass(suite: str, verdicts: List[AxiomVerdict]) -> SuiteOutcome:
    met = all(v.passed for v in verdicts)
    return SuiteOutcome(suite=suite, expected=PASS, verdicts=tuple(verdicts), met=met)


def _expect_fail(suite: str, verdicts: List[AxiomVerdict], reproduced: bool) -> SuiteOutcome:
    met = reproduced and bool(verdicts) and all(not v.passed for v in verdicts)
    return SuiteOutcome(suite=suite, expected=FAIL, verdicts=tuple(verdicts), met=met)


def suite_anonymity(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    by_family: Dict[str, List[AxiomVerdict]] = {}
    for trial in range(config.trials):
        losses = _random_losses(rng, 2, 30)
        n = len(losses)
        specs = {
            "additive": AggregatorSpec(kind=ADDITIVE),
            "multiplicative": AggregatorSpec(kind=MULTIPLICATIVE),
            "quantile:0.5": AggregatorSpec(kind=QUANTILE, q=0.5),
            "quantile:1": AggregatorSpec(kind=QUANTILE, q=1.0),
            "ltype:asc": AggregatorSpec(
                kind=LTYPE, coefficients=tuple(rng.uniform(0.0, 2.0, n).tolist())
            ),
            "ltype+:desc": _positive_ltype(rng, n, DESCENDING),
        }
        for name, spec in specs.items():
            by_family.setdefault(name, []).append(
                verify_anonymity(spec, losses, n_permutations=20, seed=config.seed + trial)
            )
    verdicts = [
        _first_failure_or_pass(verdicts[0].axiom, verdicts, config.seed, f"family={name}")
        for name, verdicts in by_family.items()
    ]
    return _expect_pass("anonymity", verdicts)


def suite_monotonicity(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    by_family: Dict[str, List[AxiomVerdict]] = {}
    for _ in range(config.trials):
        losses = _random_losses(rng, 2, 30, low=0.01)
        perturbations = random_perturbations(losses, 10, rng)
        specs = {
            "additive": AggregatorSpec(kind=ADDITIVE),
            "multiplicative": AggregatorSpec(kind=MULTIPLICATIVE),
            "ltype+:asc": _positive_ltype(rng, len(losses), ASCENDING),
            "ltype+:desc": _positive_ltype(rng, len(losses), DESCENDING),
        }
        for name, spec in specs.items():
            by_family.setdefault(name, []).append(
                verify_total_monotonicity(
                    spec, losses, perturbations, rel_tol=config.strict_rel_tol
                )
            )
    verdicts = [
        _first_failure_or_pass(TOTAL_MONOTONICITY, verdicts, config.seed, f"family={name}")
        for name, verdicts in by_family.items()
    ]
    return _expect_pass("monotonicity", verdicts)


def _demonstrate(
    counterexample: Counterexample, config: SuiteConfig, detail: str
) -> Tuple[AxiomVerdict, bool]:
    losses = LossVector.of(counterexample.original)
    perturbation = Perturbation(
        index=counterexample.context["index"],
        amount=counterexample.context["amount"],
    )
    verdict = verify_total_monotonicity(
        counterexample.spec,
        losses,
        [perturbation],
        rel_tol=config.strict_rel_tol,
        seed=config.seed,
    )
    verdict = replace(verdict, detail=detail)
    reproduced = (not verdict.passed) and recheck_counterexample(
        verdict.counterexample, rel_tol=config.strict_rel_tol
    )
    return verdict, reproduced


def suite_lemma1(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    verdicts: List[AxiomVerdict] = []
    reproduced = True
    for q in (0.25, 0.5, 0.9, 1.0):
        first = None
        for _ in range(config.trials):
            losses = _random_losses(rng, 5, 100)
            cx = lemma1_counterexample(q, losses)
            verdict, ok = _demonstrate(cx, config, f"q={q:g} case={cx.context['case']}")
            reproduced = reproduced and ok
            if first is None:
                first = verdict
        verdicts.append(replace(first, trials=config.trials))
    return _expect_fail("lemma1", verdicts, reproduced)


def suite_ltype_zero(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    verdicts: List[AxiomVerdict] = []
    reproduced = True
    for label in ("one_zero:asc", "one_zero:desc", "trimmed:0.2"):
        first = None
        for _ in range(config.trials):
            losses = _random_losses(rng, 5, 60)
            n = len(losses)
            if label.startswith("trimmed"):
                coefficients = list(trimmed_coefficients(n, 0.2))
                order = ASCENDING
            else:
                coefficients = rng.uniform(0.1, 2.0, n).tolist()
                coefficients[int(rng.integers(n))] = 0.0
                order = DESCENDING if label.endswith("desc") else ASCENDING
            cx = ltype_counterexample(coefficients, order, losses)
            verdict, ok = _demonstrate(cx, config, label)
            reproduced = reproduced and ok
            if first is None:
                first = verdict
        verdicts.append(replace(first, trials=config.trials))
    return _expect_fail("ltype_zero", verdicts, reproduced)


def _log_identity_violation(losses: LossVector, base: float, rel_tol: float = 1e-9):
    product = aggregate_multiplicative(losses)
    log_sum = aggregate_additive(to_log_domain(losses, base=base)).value
    via_product = product.log_value / math.log(base)
    if math.isclose(via_product, log_sum, rel_tol=rel_tol, abs_tol=1e-12):
        return None
    return failed(
        RANK_ISOMORPHISM,
        trials=1,
        counterexample=Counterexample(
            original=losses.losses,
            perturbed=losses.losses,
            total_before=via_product,
            total_after=log_sum,
            note="log of the product differs from the sum of logs",
            context={"base": base},
        ),
    )


def suite_isomorphism(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    bases = [math.e, 2.0, 10.0]
    if config.log_base not in bases:
        bases.append(config.log_base)

    verdicts: List[AxiomVerdict] = []
    for base in bases:
        results: List[AxiomVerdict] = []
        for _ in range(config.trials):
            n = int(rng.integers(2, 40))
            pair = [LossVector.of(rng.uniform(0.05, 20.0, n).tolist()) for _ in range(2)]
            results.append(check_rank_preservation(pair, base=base))
            identity = _log_identity_violation(pair[0], base)
            if identity is not None:
                results.append(identity)
        verdicts.append(
            _first_failure_or_pass(RANK_ISOMORPHISM, results, config.seed, f"base={base:g}")
        )

    # Zero losses have no logarithm; a common shift makes the product usable again.
    shifted: List[AxiomVerdict] = []
    for _ in range(config.trials):
        n = int(rng.integers(2, 40))
        stacked = rng.uniform(0.0, 20.0, (3, n))
        stacked[np.arange(3), rng.integers(n, size=3)] = 0.0
        # One shift for all sets, so their totals stay comparable.
        lifted, _ = shift_positive(LossVector.of(stacked.ravel().tolist()), margin=config.shift_margin)
        rows = lifted.as_array().reshape(3, n)
        shifted.append(
            check_rank_preservation([LossVector.of(r.tolist()) for r in rows], base=config.log_base)
        )
    verdicts.append(
        _first_failure_or_pass(
            RANK_ISOMORPHISM, shifted, config.seed, f"shift_margin={config.shift_margin:g}"
        )
    )
    return _expect_pass("isomorphism", verdicts)


def suite_fisher(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    n = 20
    actuals = rng.uniform(10.0, 1000.0, n).tolist()
    specs = {
        "additive": AggregatorSpec(kind=ADDITIVE),
        "multiplicative": AggregatorSpec(kind=MULTIPLICATIVE),
        "quantile:0.5": AggregatorSpec(kind=QUANTILE, q=0.5),
        "quantile:1": AggregatorSpec(kind=QUANTILE, q=1.0),
        "ltype+": _positive_ltype(rng, n),
    }
    verdicts: List[AxiomVerdict] = []
    for kind in (ABSOLUTE_PERCENTAGE_ERROR, SQUARED_ERROR):
        for name, spec in specs.items():
            verdict = verify_fisher_consistency(
                IndividualLossSpec(kind=kind),
                spec,
                actuals,
                n_trials=config.fisher_trials,
                perturbation_scale=config.perturbation_scale,
                seed=config.seed,
            )
            verdicts.append(replace(verdict, detail=f"loss={kind} family={name}"))
    return _expect_pass("fisher", verdicts)


def suite_pointwise(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    verdicts: List[AxiomVerdict] = []
    for kind in LOSS_KINDS:
        spec = IndividualLossSpec(kind=kind)
        results = []
        for _ in range(config.trials):
            actual = float(rng.uniform(1.0, 1000.0))
            below = rng.uniform(0.0, actual, 4)
            above = rng.uniform(actual, 2.0 * actual, 4)
            grid = sorted(set(below.tolist() + [actual] + above.tolist()))
            results.append(check_pointwise_monotonicity(spec, actual, grid))
        verdicts.append(
            _first_failure_or_pass(results[0].axiom, results, config.seed, f"loss={kind}")
        )
    return _expect_pass("pointwise", verdicts)


TRANSFORM_CHECKS = (
    TransformSpec(T_NONE),
    TransformSpec(T_MEAN),
    TransformSpec(T_GEOMEAN),
    TransformSpec(T_ROOT, 2.0),
    TransformSpec(T_SCALE, 3.0),
    TransformSpec(T_LOG, 10.0),
)


def suite_transforms(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    verdicts: List[AxiomVerdict] = []
    for _ in range(config.trials):
        losses = _random_losses(rng, 3, 20, low=0.5)
        perturbations = random_perturbations(losses, 5, rng)
        perturbations.append(Perturbation(index=int(np.argmax(losses.as_array())), amount=1.0))
        bases = (
            AggregatorSpec(kind=ADDITIVE),
            AggregatorSpec(kind=MULTIPLICATIVE),
            AggregatorSpec(kind=QUANTILE, q=0.5),
            _positive_ltype(rng, len(losses)),
        )
        for base in bases:
            raw = verify_total_monotonicity(base, losses, perturbations, rel_tol=config.strict_rel_tol)
            for t in TRANSFORM_CHECKS:
                transformed = verify_total_monotonicity(
                    base.with_transform(t), losses, perturbations, rel_tol=config.strict_rel_tol
                )
                if transformed.status == raw.status:
                    continue
                witness = transformed if not transformed.passed else raw
                verdicts.append(
                    replace(witness, detail=f"transform={t.label()} flipped spec={base.label()}")
                )
    if not verdicts:
        verdicts.append(
            passed(
                TOTAL_MONOTONICITY,
                trials=config.trials,
                seed=config.seed,
                detail="no transform flipped a verdict",
            )
        )
    return _expect_pass("transforms", verdicts)


def suite_gmape(config: SuiteConfig) -> SuiteOutcome:
    rng = np.random.default_rng(config.seed)
    kind, spec = PRESETS["GMAPE"]
    loss_spec = IndividualLossSpec(kind=kind)
    n = 10
    variants = max(config.trials, 100)
    actuals = rng.uniform(50.0, 500.0, n)
    predictions = actuals * rng.uniform(0.5, 1.5, n)
    perfect = int(rng.integers(n))
    predictions[perfect] = actuals[perfect]

    base_losses = eval_loss_array(loss_spec, predictions, actuals)
    base = aggregate(base_losses, spec)
    reproduced = base.degenerate and base.value == 0.0
    cx = None
    for _ in range(variants):
        variant = actuals * rng.uniform(0.1, 3.0, n)
        variant[perfect] = actuals[perfect]
        variant_losses = eval_loss_array(loss_spec, variant, actuals)
        result = aggregate(variant_losses, spec)
        if not (result.degenerate and result.value == 0.0):
            reproduced = False
            log_event("WARNING", gmape_not_degenerate=result.value_text())
            continue
        if cx is None and any(v > b for v, b in zip(variant_losses.losses, base_losses.losses)):
            cx = Counterexample(
                original=base_losses.losses,
                perturbed=variant_losses.losses,
                total_before=total_key(base),
                total_after=total_key(result),
                note="GMAPE stays 0 when other units get worse",
                spec=spec,
                context={"kind": "monotonicity", "perfect_unit": perfect},
            )
    if cx is None:
        return SuiteOutcome(
            suite="gmape", expected=FAIL, verdicts=(), met=False, detail="no variant raised a loss"
        )
    verdict = failed(
        TOTAL_MONOTONICITY,
        trials=variants,
        counterexample=cx,
        seed=config.seed,
        detail="degenerate multiplicative total",
    )
    reproduced = reproduced and recheck_counterexample(cx, rel_tol=config.strict_rel_tol)
    return _expect_fail("gmape", [verdict], reproduced)


SUITES: Dict[str, Callable[[SuiteConfig], SuiteOutcome]] = {
    "anonymity": suite_anonymity,
    "monotonicity": suite_monotonicity,
    "lemma1": suite_lemma1,
    "ltype_zero": suite_ltype_zero,
    "isomorphism": suite_isomorphism,
    "fisher": suite_fisher,
    "pointwise": suite_pointwise,
    "transforms": suite_transforms,
    "gmape": suite_gmape,
}


def run_suites(names: Sequence[str], config: SuiteConfig) -> List[SuiteOutcome]:
    outcomes = []
    for name in names:
        log_event("INFO", suite=name, seed=config.seed, trials=config.trials)
        outcome = SUITES[name](config)
        log_event("INFO", suite=name, expected=outcome.expected, met=outcome.met)
        outcomes.append(outcome)
    return outcomes
