from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import (
    EmptyVectorError,
    InvalidSpecError,
    LengthMismatchError,
    LogOfNonPositiveError,
    NegativeCoefficientError,
    NonFiniteInputError,
    QOutOfRangeError,
)
from src.loss_core import (
    ABSOLUTE_ERROR,
    ABSOLUTE_PERCENTAGE_ERROR,
    SQUARED_ERROR,
    SQUARED_PERCENTAGE_ERROR,
    IndividualLossSpec,
    LossVector,
    PredictionRecord,
    eval_loss_vector,
)
from src.settings import POLICY_SKIP

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"
QUANTILE = "quantile"
LTYPE = "ltype"
AGGREGATOR_KINDS = (ADDITIVE, MULTIPLICATIVE, QUANTILE, LTYPE)

ASCENDING = "asc"
DESCENDING = "desc"

T_NONE = "none"
T_MEAN = "mean"
T_GEOMEAN = "geomean"
T_ROOT = "root"
T_SCALE = "scale"
T_LOG = "log"
TRANSFORM_KINDS = (T_NONE, T_MEAN, T_GEOMEAN, T_ROOT, T_SCALE, T_LOG)

FINITE = "finite"
POS_INF = "+inf"
NEG_INF = "-inf"

# exp() overflows a double above this.
_MAX_LOG = math.log(np.finfo(np.float64).max)


@dataclass(frozen=True)
class TransformSpec:
    kind: str = T_NONE
    param: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in TRANSFORM_KINDS:
            raise InvalidSpecError(f"unknown_transform={self.kind}")
        if self.kind in (T_ROOT, T_SCALE, T_LOG):
            if self.param is None or not math.isfinite(self.param):
                raise InvalidSpecError(f"transform {self.kind} needs a finite parameter")
            if self.kind == T_LOG and not self.param > 1.0:
                raise InvalidSpecError(f"log base={self.param} must exceed 1")
            if self.kind != T_LOG and not self.param > 0.0:
                raise InvalidSpecError(f"{self.kind} parameter={self.param} must be > 0")
        elif self.param is not None:
            raise InvalidSpecError(f"transform {self.kind} takes no parameter")

    def label(self) -> str:
        if self.param is None:
            return self.kind
        return f"{self.kind}:{self.param:g}"


@dataclass(frozen=True)
class AggregatorSpec:
    kind: str
    q: Optional[float] = None
    coefficients: Tuple[float, ...] = ()
    order: str = ASCENDING
    transform: Tuple[TransformSpec, ...] = ()

    def __post_init__(self) -> None:
        if isinstance(self.transform, TransformSpec):
            object.__setattr__(self, "transform", (self.transform,))
        else:
            object.__setattr__(self, "transform", tuple(self.transform))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

        if self.kind not in AGGREGATOR_KINDS:
            raise InvalidSpecError(f"unknown_aggregator={self.kind}")
        if self.kind == QUANTILE:
            if self.q is None:
                raise InvalidSpecError("quantile aggregator needs q")
            _check_q(self.q)
        if self.kind == LTYPE:
            if self.order not in (ASCENDING, DESCENDING):
                raise InvalidSpecError(f"unknown_order={self.order}")
            _check_coefficients(self.coefficients)

    @property
    def all_positive(self) -> bool:
        return self.kind == LTYPE and bool(self.coefficients) and min(self.coefficients) > 0

    @property
    def admissible(self) -> bool:
        if self.kind in (ADDITIVE, MULTIPLICATIVE):
            return True
        return self.all_positive

    def with_transform(self, *steps: TransformSpec) -> "AggregatorSpec":
        return replace(self, transform=tuple(steps))

    def label(self) -> str:
        if self.kind == QUANTILE:
            base = f"{QUANTILE}:{self.q:g}"
        elif self.kind == LTYPE:
            base = f"{LTYPE}[{len(self.coefficients)}]:{self.order}"
        else:
            base = self.kind
        steps = [t.label() for t in self.transform if t.kind != T_NONE]
        if steps:
            return f"{base}/{'+'.join(steps)}"
        return base


@dataclass(frozen=True)
class TotalLossResult:
    value: Optional[float]
    log_value: Optional[float]
    degenerate: bool
    n_units: int
    spec_echo: AggregatorSpec
    value_state: str = FINITE
    log_state: Optional[str] = None
    skipped_units: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def l_plus(self) -> bool:
        return self.spec_echo.all_positive

    def value_text(self) -> str:
        if self.value_state == POS_INF:
            return POS_INF
        return repr(self.value)

    def log_text(self) -> Optional[str]:
        if self.log_state == NEG_INF:
            return NEG_INF
        if self.log_state == FINITE:
            return repr(self.log_value)
        return None


def _check_q(q: float) -> None:
    if not (math.isfinite(q) and 0.0 < q <= 1.0):
        raise QOutOfRangeError(q)


def _check_coefficients(coefficients: Sequence[float]) -> None:
    for i, c in enumerate(coefficients):
        if not math.isfinite(c):
            raise NonFiniteInputError(f"coefficient[{i}]", c)
        if c < 0:
            raise NegativeCoefficientError(i, c)


def _canonical(losses: LossVector) -> np.ndarray:
    if len(losses) == 0:
        raise EmptyVectorError("loss vector is empty")
    return np.sort(losses.as_array(), kind="stable")


def _from_log(log_value: float) -> Tuple[Optional[float], str]:
    if log_value > _MAX_LOG:
        return None, POS_INF
    return math.exp(log_value), FINITE


def quantile_index(q: float, n: int) -> int:
    """1-based order-statistic index ceil(q*n), never interpolated."""
    _check_q(q)
    # round() absorbs products like 0.7*10 = 7.000000000000001.
    return max(1, min(n, math.ceil(round(q * n, 9))))


def quantile_selector_coefficients(q: float, n: int) -> Tuple[float, ...]:
    k = quantile_index(q, n)
    return tuple(1.0 if i == k - 1 else 0.0 for i in range(n))


def trimmed_coefficients(n: int, proportion: float) -> Tuple[float, ...]:
    if not 0.0 <= proportion < 0.5:
        raise InvalidSpecError(f"trim proportion={proportion} must be in [0, 0.5)")
    k = int(n * proportion)
    return tuple(0.0 if (i < k or i >= n - k) else 1.0 for i in range(n))


def _fold(
    ordered: np.ndarray, weights: Optional[np.ndarray] = None
) -> Tuple[Optional[float], Optional[float], str]:
    """Sum of nonnegative terms as (value, log_value, value_state).

    A sum past the double range comes back with value None, the natural log of
    the sum in log_value, and value_state +inf.
    """
    with np.errstate(over="ignore"):
        terms = ordered if weights is None else weights * ordered
    try:
        total = math.fsum(terms)
    except OverflowError:
        total = math.inf
    if math.isfinite(total):
        return total, None, FINITE
    loss_scale = float(ordered.max())
    scaled = ordered / loss_scale
    log_total = math.log(loss_scale)
    if weights is not None:
        weight_scale = float(weights.max())
        scaled = (weights / weight_scale) * scaled
        log_total += math.log(weight_scale)
    return None, log_total + math.log(math.fsum(scaled)), POS_INF


def aggregate_additive(losses: LossVector) -> TotalLossResult:
    ordered = _canonical(losses)
    value, log_value, state = _fold(ordered)
    return TotalLossResult(
        value=value,
        log_value=log_value,
        degenerate=False,
        n_units=len(ordered),
        spec_echo=AggregatorSpec(kind=ADDITIVE),
        value_state=state,
        log_state=None if log_value is None else FINITE,
        skipped_units=losses.skipped_units,
    )


def aggregate_multiplicative(losses: LossVector) -> TotalLossResult:
    ordered = _canonical(losses)
    spec = AggregatorSpec(kind=MULTIPLICATIVE)
    if ordered[0] == 0.0:
        return TotalLossResult(
            value=0.0,
            log_value=None,
            degenerate=True,
            n_units=len(ordered),
            spec_echo=spec,
            log_state=NEG_INF,
            skipped_units=losses.skipped_units,
        )
    log_value = math.fsum(np.log(ordered))
    value, state = _from_log(log_value)
    return TotalLossResult(
        value=value,
        log_value=log_value,
        degenerate=False,
        n_units=len(ordered),
        spec_echo=spec,
        value_state=state,
        log_state=FINITE,
        skipped_units=losses.skipped_units,
    )


def aggregate_quantile(losses: LossVector, q: float) -> TotalLossResult:
    _check_q(q)
    ordered = _canonical(losses)
    k = quantile_index(q, len(ordered))
    return TotalLossResult(
        value=float(ordered[k - 1]),
        log_value=None,
        degenerate=False,
        n_units=len(ordered),
        spec_echo=AggregatorSpec(kind=QUANTILE, q=q),
        skipped_units=losses.skipped_units,
    )


def aggregate_ltype(
    losses: LossVector,
    coefficients: Sequence[float],
    order: str = ASCENDING,
) -> TotalLossResult:
    spec = AggregatorSpec(kind=LTYPE, coefficients=tuple(coefficients), order=order)
    ordered = _canonical(losses)
    if len(spec.coefficients) != len(ordered):
        raise LengthMismatchError(expected=len(ordered), got=len(spec.coefficients))
    if order == DESCENDING:
        ordered = ordered[::-1]
    weights = np.asarray(spec.coefficients, dtype=np.float64)
    value, log_value, state = _fold(ordered, weights)
    return TotalLossResult(
        value=value,
        log_value=log_value,
        degenerate=False,
        n_units=len(ordered),
        spec_echo=spec,
        value_state=state,
        log_state=None if log_value is None else FINITE,
        skipped_units=losses.skipped_units,
    )


def apply_transform(result: TotalLossResult, t: TransformSpec) -> TotalLossResult:
    if t.kind == T_NONE:
        return result

    n = result.n_units
    value = result.value
    log_value = result.log_value
    tracked = result.log_state == FINITE

    if t.kind == T_LOG:
        if result.log_state == NEG_INF or (not tracked and (value is None or value <= 0)):
            raise LogOfNonPositiveError(0.0 if value is None else value)
        natural = log_value if tracked else math.log(value)
        return replace(
            result,
            value=natural / math.log(t.param),
            value_state=FINITE,
            log_value=None,
            log_state=None,
        )

    if result.log_state == NEG_INF:
        # Every remaining transform maps 0 to 0.
        return result

    if tracked:
        if t.kind == T_MEAN:
            log_value = log_value - math.log(n)
        elif t.kind == T_GEOMEAN:
            log_value = log_value / n
        elif t.kind == T_ROOT:
            log_value = log_value / t.param
        elif t.kind == T_SCALE:
            log_value = log_value + math.log(t.param)
        new_value, state = _from_log(log_value)
        return replace(result, value=new_value, value_state=state, log_value=log_value)

    if t.kind == T_MEAN:
        new_value = value / n
    elif t.kind == T_SCALE:
        new_value = value * t.param
        if not math.isfinite(new_value):
            return replace(
                result,
                value=None,
                value_state=POS_INF,
                log_value=math.log(value) + math.log(t.param),
                log_state=FINITE,
            )
    else:
        if value < 0:
            raise LogOfNonPositiveError(value)
        exponent = 1.0 / n if t.kind == T_GEOMEAN else 1.0 / t.param
        new_value = value**exponent
    return replace(result, value=new_value)


def apply_transforms(
    result: TotalLossResult, steps: Union[TransformSpec, Sequence[TransformSpec]]
) -> TotalLossResult:
    if isinstance(steps, TransformSpec):
        steps = (steps,)
    for step in steps:
        result = apply_transform(result, step)
    return result


def aggregate(losses: LossVector, spec: AggregatorSpec) -> TotalLossResult:
    if spec.kind == ADDITIVE:
        raw = aggregate_additive(losses)
    elif spec.kind == MULTIPLICATIVE:
        raw = aggregate_multiplicative(losses)
    elif spec.kind == QUANTILE:
        raw = aggregate_quantile(losses, spec.q)
    else:
        raw = aggregate_ltype(losses, spec.coefficients, spec.order)
    return apply_transforms(replace(raw, spec_echo=spec), spec.transform)


def compare_totals(a: TotalLossResult, b: TotalLossResult, rel_tol: float = 1e-9) -> int:
    """Return -1, 0 or 1; values within `rel_tol` relative count as a tie."""
    if a.log_state is not None and b.log_state is not None:
        if a.log_state == NEG_INF or b.log_state == NEG_INF:
            return int(a.log_state != NEG_INF) - int(b.log_state != NEG_INF)
        diff = a.log_value - b.log_value
        if abs(diff) <= math.log1p(rel_tol):
            return 0
        return 1 if diff > 0 else -1
    if a.value_state == POS_INF or b.value_state == POS_INF:
        return int(a.value_state == POS_INF) - int(b.value_state == POS_INF)
    if math.isclose(a.value, b.value, rel_tol=rel_tol):
        return 0
    return 1 if a.value > b.value else -1


def strictly_increased(before: TotalLossResult, after: TotalLossResult, rel_tol: float = 1e-12) -> bool:
    if before.log_state == FINITE and after.log_state == FINITE:
        return after.log_value - before.log_value > math.log1p(rel_tol)
    if before.log_state == NEG_INF or after.log_state == NEG_INF:
        return before.log_state == NEG_INF and after.log_state != NEG_INF
    if before.value_state == POS_INF or after.value_state == POS_INF:
        return before.value_state != POS_INF and after.value_state == POS_INF
    return after.value > before.value and (after.value - before.value) > rel_tol * abs(before.value)


def total_key(result: TotalLossResult) -> float:
    if result.log_state == FINITE:
        return result.log_value
    if result.log_state == NEG_INF:
        return -math.inf
    return result.value


def order_key(result: TotalLossResult) -> Tuple[int, float, float]:
    """Total order over results of one metric, including +inf and -inf states."""
    if result.log_state == NEG_INF:
        return (-1, 0.0, 0.0)
    if result.value_state == POS_INF:
        return (1, result.log_value, 0.0)
    tracked = result.log_value if result.log_state == FINITE else 0.0
    return (0, result.value, tracked)


PRESETS: Dict[str, Tuple[str, AggregatorSpec]] = {
    "MAPE": (
        ABSOLUTE_PERCENTAGE_ERROR,
        AggregatorSpec(kind=ADDITIVE, transform=(TransformSpec(T_MEAN),)),
    ),
    "MEDAPE": (ABSOLUTE_PERCENTAGE_ERROR, AggregatorSpec(kind=QUANTILE, q=0.5)),
    "RMSE": (
        SQUARED_ERROR,
        AggregatorSpec(
            kind=ADDITIVE,
            transform=(TransformSpec(T_MEAN), TransformSpec(T_ROOT, 2.0)),
        ),
    ),
    "GMAPE": (
        ABSOLUTE_PERCENTAGE_ERROR,
        AggregatorSpec(kind=MULTIPLICATIVE, transform=(TransformSpec(T_GEOMEAN),)),
    ),
    "MAE": (ABSOLUTE_ERROR, AggregatorSpec(kind=ADDITIVE, transform=(TransformSpec(T_MEAN),))),
    "MSE": (SQUARED_ERROR, AggregatorSpec(kind=ADDITIVE, transform=(TransformSpec(T_MEAN),))),
    "RMSPE": (
        SQUARED_PERCENTAGE_ERROR,
        AggregatorSpec(
            kind=ADDITIVE,
            transform=(TransformSpec(T_MEAN), TransformSpec(T_ROOT, 2.0)),
        ),
    ),
    "MAXAPE": (ABSOLUTE_PERCENTAGE_ERROR, AggregatorSpec(kind=QUANTILE, q=1.0)),
}


def evaluate_metric(
    loss_spec: IndividualLossSpec,
    agg_spec: AggregatorSpec,
    records: Sequence[PredictionRecord],
    prediction_column: str,
) -> Tuple[LossVector, TotalLossResult]:
    losses = eval_loss_vector(loss_spec, records, prediction_column)
    return losses, aggregate(losses, agg_spec)


def preset_metric(
    name: str,
    records: Sequence[PredictionRecord],
    prediction_column: str,
    zero_actual_policy: str = POLICY_SKIP,
) -> TotalLossResult:
    key = name.strip().upper()
    if key not in PRESETS:
        raise InvalidSpecError(f"unknown_metric={name} (known: {', '.join(PRESETS)})")
    kind, agg_spec = PRESETS[key]
    _, result = evaluate_metric(
        IndividualLossSpec(kind=kind, zero_actual_policy=zero_actual_policy),
        agg_spec,
        records,
        prediction_column,
    )
    return result
