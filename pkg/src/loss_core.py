from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import (
    DegenerateGridError,
    EmptyAfterFilteringError,
    InvalidSpecError,
    NegativeInputError,
    NonFiniteInputError,
    ZeroActualError,
)
from src.logger import log_event
from src.settings import POLICY_ERROR, POLICY_SKIP
from src.verdicts import POINTWISE_MONOTONICITY, AxiomVerdict, Counterexample, failed, passed

ABSOLUTE_ERROR = "ae"
SQUARED_ERROR = "se"
ABSOLUTE_PERCENTAGE_ERROR = "ape"
SQUARED_PERCENTAGE_ERROR = "spe"

LOSS_KINDS = (
    ABSOLUTE_ERROR,
    SQUARED_ERROR,
    ABSOLUTE_PERCENTAGE_ERROR,
    SQUARED_PERCENTAGE_ERROR,
)
PERCENTAGE_KINDS = frozenset({ABSOLUTE_PERCENTAGE_ERROR, SQUARED_PERCENTAGE_ERROR})

RAW_LOSS = "raw"
LOG_LOSS = "log"


def _ensure_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise NonFiniteInputError(name, value)


def _ensure_nonnegative(name: str, value: float) -> None:
    _ensure_finite(name, value)
    if value < 0:
        raise NegativeInputError(name, value)


@dataclass(frozen=True)
class PredictionPair:
    prediction: float
    actual: float

    def __post_init__(self) -> None:
        _ensure_nonnegative("prediction", self.prediction)
        _ensure_nonnegative("actual", self.actual)


@dataclass(frozen=True)
class PredictionRecord:
    unit_id: str
    actual: float
    predictions: Mapping[str, float]

    def pair(self, prediction_column: str) -> PredictionPair:
        return PredictionPair(
            prediction=float(self.predictions[prediction_column]),
            actual=float(self.actual),
        )


@dataclass(frozen=True)
class IndividualLossSpec:
    kind: str
    zero_actual_policy: str = POLICY_SKIP

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise InvalidSpecError(f"unknown_loss_kind={self.kind}")
        if self.zero_actual_policy not in (POLICY_SKIP, POLICY_ERROR):
            raise InvalidSpecError(f"unknown_zero_actual_policy={self.zero_actual_policy}")

    @property
    def is_percentage(self) -> bool:
        return self.kind in PERCENTAGE_KINDS


@dataclass(frozen=True)
class DomainTag:
    tag: str = RAW_LOSS
    log_base: float = math.e
    shift_k: float = 0.0

    def __post_init__(self) -> None:
        if self.tag not in (RAW_LOSS, LOG_LOSS):
            raise InvalidSpecError(f"unknown_domain_tag={self.tag}")
        if not self.log_base > 1.0:
            raise InvalidSpecError(f"log_base={self.log_base} must exceed 1")
        if self.shift_k < 0:
            raise InvalidSpecError(f"shift_k={self.shift_k} must be >= 0")


@dataclass(frozen=True)
class LossVector:
    losses: Tuple[float, ...]
    skipped_units: Tuple[str, ...] = ()
    source_spec: Optional[IndividualLossSpec] = None
    unit_ids: Tuple[str, ...] = ()
    domain: DomainTag = field(default_factory=DomainTag)

    def __post_init__(self) -> None:
        object.__setattr__(self, "losses", tuple(float(x) for x in self.losses))
        object.__setattr__(self, "skipped_units", tuple(self.skipped_units))
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        for i, value in enumerate(self.losses):
            # Log-domain losses may be negative; raw losses never are.
            if self.domain.tag == RAW_LOSS:
                _ensure_nonnegative(f"loss[{i}]", value)
            else:
                _ensure_finite(f"log_loss[{i}]", value)
        if self.unit_ids and len(self.unit_ids) != len(self.losses):
            raise InvalidSpecError(
                f"unit_ids={len(self.unit_ids)} does not match losses={len(self.losses)}"
            )

    @classmethod
    def of(cls, values: Sequence[float]) -> "LossVector":
        return cls(losses=tuple(float(v) for v in values))

    def __len__(self) -> int:
        return len(self.losses)

    @property
    def input_count(self) -> int:
        return len(self.losses) + len(self.skipped_units)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.losses, dtype=np.float64)

    def with_losses(self, values: Sequence[float], domain: Optional[DomainTag] = None) -> "LossVector":
        return LossVector(
            losses=tuple(float(v) for v in values),
            skipped_units=self.skipped_units,
            source_spec=self.source_spec,
            unit_ids=self.unit_ids,
            domain=self.domain if domain is None else domain,
        )


def _loss_formula(kind: str, prediction, actual):
    # Works on floats and on numpy arrays with the same operation order, so a
    # vectorised loss is bit-identical to the scalar one.
    diff = prediction - actual
    if kind == ABSOLUTE_ERROR:
        return abs(diff)
    if kind == SQUARED_ERROR:
        return diff * diff
    if kind == ABSOLUTE_PERCENTAGE_ERROR:
        return 100.0 * abs(diff) / actual
    pct = 100.0 * diff / actual
    return pct * pct


def eval_loss(spec: IndividualLossSpec, pair: PredictionPair) -> float:
    if spec.is_percentage and pair.actual == 0:
        raise ZeroActualError()
    loss = float(_loss_formula(spec.kind, float(pair.prediction), float(pair.actual)))
    _ensure_finite("loss", loss)
    return loss


def eval_loss_vector(
    spec: IndividualLossSpec,
    records: Sequence[PredictionRecord],
    prediction_column: str,
) -> LossVector:
    kept_ids: list[str] = []
    skipped: list[str] = []
    predictions: list[float] = []
    actuals: list[float] = []

    for record in records:
        pair = record.pair(prediction_column)
        if spec.is_percentage and pair.actual == 0:
            if spec.zero_actual_policy == POLICY_ERROR:
                raise ZeroActualError(record.unit_id)
            skipped.append(record.unit_id)
            continue
        kept_ids.append(record.unit_id)
        predictions.append(pair.prediction)
        actuals.append(pair.actual)

    if skipped:
        log_event(
            "WARNING",
            zero_actual_skipped=len(skipped),
            column=prediction_column,
            loss=spec.kind,
            units=skipped,
        )
    if not kept_ids:
        raise EmptyAfterFilteringError(
            f"no units left for column={prediction_column} loss={spec.kind}"
        )

    losses = _loss_formula(
        spec.kind,
        np.asarray(predictions, dtype=np.float64),
        np.asarray(actuals, dtype=np.float64),
    )
    for i, value in enumerate(losses):
        _ensure_finite(f"loss[{kept_ids[i]}]", float(value))

    return LossVector(
        losses=tuple(float(v) for v in losses),
        skipped_units=tuple(skipped),
        source_spec=spec,
        unit_ids=tuple(kept_ids),
    )


def eval_loss_array(
    spec: IndividualLossSpec,
    predictions: Sequence[float],
    actuals: Sequence[float],
) -> LossVector:
    p = np.asarray(predictions, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if p.shape != a.shape:
        raise InvalidSpecError(f"predictions={p.shape} and actuals={a.shape} differ in shape")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise NonFiniteInputError("input", float("nan"))
    if np.any(p < 0) or np.any(a < 0):
        raise NegativeInputError("input", float(min(p.min(), a.min())))
    if spec.is_percentage and np.any(a == 0):
        raise ZeroActualError()
    return LossVector(losses=tuple(_loss_formula(spec.kind, p, a).tolist()), source_spec=spec)


LossFunction = Union[IndividualLossSpec, Callable[[float, float], float]]


def _as_callable(loss: LossFunction) -> Callable[[float, float], float]:
    if isinstance(loss, IndividualLossSpec):
        return lambda p, a: eval_loss(loss, PredictionPair(prediction=p, actual=a))
    return loss


def check_pointwise_monotonicity(
    loss: LossFunction,
    actual: float,
    grid: Sequence[float],
) -> AxiomVerdict:
    _ensure_finite("actual", actual)
    points = sorted({float(p) for p in grid})
    if len(points) < 3:
        raise DegenerateGridError(f"grid has {len(points)} distinct points, need >= 3")

    fn = _as_callable(loss)
    values = [float(fn(p, actual)) for p in points]

    comparisons = 0
    for i in range(len(points) - 1):
        low, high = points[i], points[i + 1]
        if high <= actual:
            near, far, near_loss, far_loss = high, low, values[i + 1], values[i]
        elif low >= actual:
            near, far, near_loss, far_loss = low, high, values[i], values[i + 1]
        else:
            continue
        comparisons += 1
        if not far_loss > near_loss:
            return failed(
                POINTWISE_MONOTONICITY,
                trials=comparisons,
                counterexample=Counterexample(
                    original=(near,),
                    perturbed=(far,),
                    total_before=near_loss,
                    total_after=far_loss,
                    note="loss did not increase moving away from the actual value",
                    context={"actual": actual},
                ),
            )

    if comparisons == 0:
        raise DegenerateGridError("grid has no adjacent pair on one side of the actual value")
    return passed(POINTWISE_MONOTONICITY, trials=comparisons)
