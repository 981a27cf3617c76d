from __future__ import annotations

import math
import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()

POLICY_SKIP = "skip"
POLICY_ERROR = "error"

FORMAT_TABLE = "table"
FORMAT_STRUCTURED = "structured"


def _parse_bool(value: str) -> bool:
    return value.strip().lower() in {"1", "true", "yes", "y", "on"}


def _parse_float(value: str, default: float) -> float:
    try:
        parsed = float(value)
    except (TypeError, ValueError):
        return default
    if not math.isfinite(parsed):
        return default
    return parsed


def _parse_int(value: str, default: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        return default


@dataclass(frozen=True)
class RuntimeSettings:
    zero_actual_policy: str
    shift_margin: float
    log_base: float
    strict_rel_tol: float
    rank_tie_rel_tol: float
    verify_trials: int
    fisher_trials: int
    perturbation_scale: float
    output_format: str
    verbose: bool


def load_runtime_settings() -> RuntimeSettings:
    zero_actual_policy = os.getenv("ZERO_ACTUAL_POLICY", POLICY_SKIP).strip().lower()
    if zero_actual_policy not in {POLICY_SKIP, POLICY_ERROR}:
        zero_actual_policy = POLICY_SKIP

    output_format = os.getenv("OUTPUT_FORMAT", FORMAT_TABLE).strip().lower()
    if output_format not in {FORMAT_TABLE, FORMAT_STRUCTURED}:
        output_format = FORMAT_TABLE

    shift_margin = _parse_float(os.getenv("SHIFT_MARGIN", "1.0"), 1.0)
    if shift_margin <= 0:
        shift_margin = 1.0

    # Any base > 1 preserves order; anything else falls back to natural logs.
    log_base = _parse_float(os.getenv("LOG_BASE", str(math.e)), math.e)
    if log_base <= 1.0:
        log_base = math.e

    perturbation_scale = _parse_float(os.getenv("PERTURBATION_SCALE", "0.5"), 0.5)
    if perturbation_scale <= 0:
        perturbation_scale = 0.5

    return RuntimeSettings(
        zero_actual_policy=zero_actual_policy,
        shift_margin=shift_margin,
        log_base=log_base,
        strict_rel_tol=max(0.0, _parse_float(os.getenv("STRICT_REL_TOL", "1e-12"), 1e-12)),
        rank_tie_rel_tol=max(
            0.0, _parse_float(os.getenv("RANK_TIE_REL_TOL", "1e-9"), 1e-9)
        ),
        verify_trials=max(1, _parse_int(os.getenv("VERIFY_TRIALS", "200"), 200)),
        fisher_trials=max(1, _parse_int(os.getenv("FISHER_TRIALS", "1000"), 1000)),
        perturbation_scale=perturbation_scale,
        output_format=output_format,
        verbose=_parse_bool(os.getenv("VERBOSE", "false")),
    )
