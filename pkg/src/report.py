from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from src.aggregators import NEG_INF, POS_INF, TotalLossResult
from src.settings import FORMAT_STRUCTURED, FORMAT_TABLE
from src.suites import SuiteOutcome


@dataclass(frozen=True)
class MetricRow:
    metric: str
    column: str
    result: TotalLossResult

    @property
    def aggregator(self) -> str:
        return self.result.spec_echo.label()

    def value_field(self) -> Any:
        if self.result.value_state == POS_INF:
            return POS_INF
        return self.result.value

    def log_field(self) -> Any:
        if self.result.log_state == NEG_INF:
            return NEG_INF
        return self.result.log_value

    def record(self) -> Dict[str, Any]:
        return {
            "metric": self.metric,
            "column": self.column,
            "value": self.value_field(),
            "log_value": self.log_field(),
            "degenerate": self.result.degenerate,
            "n": self.result.n_units,
            "skipped": list(self.result.skipped_units),
        }


@dataclass(frozen=True)
class RankEntry:
    rank: int
    row: MetricRow
    tied: bool


@dataclass
class MetricReport:
    output_format: str = FORMAT_TABLE
    rows: List[MetricRow] = field(default_factory=list)
    ranking: List[RankEntry] = field(default_factory=list)
    loss_rows: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def degenerate_rows(self) -> List[MetricRow]:
        return [r for r in self.rows if r.result.degenerate]

    def render(self) -> str:
        if self.ranking:
            return render_ranking(self.ranking, self.output_format)
        return render_rows(self.rows, self.output_format)


def _dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False)


def _short(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def degenerate_warning(row: MetricRow) -> str:
    return (
        f"WARNING: degenerate multiplicative total metric={row.metric} column={row.column}"
        " (a unit has zero loss, the total is pinned at 0)"
    )


def render_rows(rows: Sequence[MetricRow], output_format: str) -> str:
    if output_format == FORMAT_STRUCTURED:
        return "\n".join(_dumps(r.record()) for r in rows)

    table = pd.DataFrame(
        [
            {
                "metric": r.metric,
                "column": r.column,
                "aggregator": r.aggregator,
                "value": _short(r.value_field()),
                "log_value": _short(r.log_field()),
                "degenerate": r.result.degenerate,
                "admissible": r.result.spec_echo.admissible,
                "n": r.result.n_units,
                "skipped": len(r.result.skipped_units),
            }
            for r in rows
        ]
    )
    lines = [table.to_string(index=False)]
    lines.extend(degenerate_warning(r) for r in rows if r.result.degenerate)
    return "\n".join(lines)


def render_ranking(ranking: Sequence[RankEntry], output_format: str) -> str:
    if output_format == FORMAT_STRUCTURED:
        return "\n".join(
            _dumps({"rank": e.rank, "tie": e.tied, **e.row.record()}) for e in ranking
        )
    table = pd.DataFrame(
        [
            {
                "rank": e.rank,
                "column": e.row.column,
                "metric": e.row.metric,
                "value": _short(e.row.value_field()),
                "tie": "tie" if e.tied else "",
            }
            for e in ranking
        ]
    )
    lines = [table.to_string(index=False)]
    lines.extend(degenerate_warning(e.row) for e in ranking if e.row.result.degenerate)
    return "\n".join(lines)


def _marker(value: Optional[float]) -> Any:
    if value is None:
        return None
    if value == float("inf"):
        return POS_INF
    if value == float("-inf"):
        return NEG_INF
    return value


def render_suites(outcomes: Sequence[SuiteOutcome], output_format: str) -> str:
    if output_format == FORMAT_STRUCTURED:
        lines = []
        for outcome in outcomes:
            for verdict in outcome.verdicts:
                lines.append(
                    _dumps(
                        {
                            "suite": outcome.suite,
                            "expected": outcome.expected,
                            "met": outcome.met,
                            **verdict.to_dict(),
                        }
                    )
                )
            if not outcome.verdicts:
                lines.append(
                    _dumps(
                        {
                            "suite": outcome.suite,
                            "expected": outcome.expected,
                            "met": outcome.met,
                            "detail": outcome.detail,
                        }
                    )
                )
        return "\n".join(lines)

    table = pd.DataFrame(
        [
            {
                "suite": outcome.suite,
                "expected": outcome.expected,
                "met": outcome.met,
                "axiom": verdict.axiom,
                "status": verdict.status,
                "trials": verdict.trials,
                "detail": verdict.detail,
            }
            for outcome in outcomes
            for verdict in outcome.verdicts
        ]
    )
    lines = [table.to_string(index=False)] if not table.empty else []
    for outcome in outcomes:
        if not outcome.verdicts:
            lines.append(f"SUITE: suite={outcome.suite} met={outcome.met} detail={outcome.detail}")
        for verdict in outcome.verdicts:
            cx = verdict.counterexample
            if cx is None:
                continue
            lines.append(
                f"COUNTEREXAMPLE: suite={outcome.suite} axiom={verdict.axiom}"
                f" spec={cx.spec.label() if cx.spec is not None else '-'}"
                f" total_before={_marker(cx.total_before)} total_after={_marker(cx.total_after)}"
            )
            lines.append(f"  original={list(cx.original)}")
            lines.append(f"  perturbed={list(cx.perturbed)}")
    return "\n".join(lines)
