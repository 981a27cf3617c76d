from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

ANONYMITY = "anonymity"
TOTAL_MONOTONICITY = "total_monotonicity"
POINTWISE_MONOTONICITY = "pointwise_monotonicity"
FISHER_CONSISTENCY = "fisher_consistency"
RANK_ISOMORPHISM = "rank_isomorphism"

AXIOMS = (
    ANONYMITY,
    TOTAL_MONOTONICITY,
    POINTWISE_MONOTONICITY,
    FISHER_CONSISTENCY,
    RANK_ISOMORPHISM,
)

PASS = "PASS"
FAIL = "FAIL"


def _marker(value: float) -> Any:
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return value


@dataclass(frozen=True)
class Counterexample:
    original: Tuple[float, ...]
    perturbed: Tuple[float, ...]
    total_before: float
    total_after: float
    note: str = ""
    spec: Optional[Any] = None
    context: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "original": list(self.original),
            "perturbed": list(self.perturbed),
            "total_before": _marker(self.total_before),
            "total_after": _marker(self.total_after),
            "note": self.note,
        }
        if self.spec is not None:
            data["spec"] = self.spec.label()
        if self.context:
            data["context"] = dict(self.context)
        return data


@dataclass(frozen=True)
class AxiomVerdict:
    axiom: str
    status: str
    trials: int
    counterexample: Optional[Counterexample] = None
    seed: Optional[int] = None
    detail: str = ""

    def __post_init__(self) -> None:
        if self.axiom not in AXIOMS:
            raise ValueError(f"unknown_axiom={self.axiom}")
        if self.status not in (PASS, FAIL):
            raise ValueError(f"unknown_status={self.status}")
        if self.status == FAIL and self.counterexample is None:
            raise ValueError("fail_verdict_without_counterexample")
        if self.status == PASS and self.trials <= 0:
            raise ValueError(f"pass_verdict_with_trials={self.trials}")

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "axiom": self.axiom,
            "status": self.status,
            "trials": self.trials,
            "seed": self.seed,
            "detail": self.detail,
            "counterexample": (
                self.counterexample.to_dict() if self.counterexample is not None else None
            ),
        }


def passed(axiom: str, trials: int, seed: Optional[int] = None, detail: str = "") -> AxiomVerdict:
    return AxiomVerdict(axiom=axiom, status=PASS, trials=trials, seed=seed, detail=detail)


def failed(
    axiom: str,
    trials: int,
    counterexample: Counterexample,
    seed: Optional[int] = None,
    detail: str = "",
) -> AxiomVerdict:
    return AxiomVerdict(
        axiom=axiom,
        status=FAIL,
        trials=trials,
        counterexample=counterexample,
        seed=seed,
        detail=detail,
    )
