from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from src.aggregators import (
    ADDITIVE,
    ASCENDING,
    DESCENDING,
    LTYPE,
    MULTIPLICATIVE,
    PRESETS,
    QUANTILE,
    TRANSFORM_KINDS,
    AggregatorSpec,
    TransformSpec,
    compare_totals,
    evaluate_metric,
    order_key,
)
from src.dataset import Dataset, parse_dataset, read_coefficients
from src.errors import (
    EXIT_DATA,
    EXIT_DEGENERATE,
    EXIT_OK,
    EXIT_USAGE,
    InvalidSpecError,
    MetricsError,
    UsageError,
)
from src.logger import LossTableCsvLogger, log_event, set_verbose
from src.loss_core import LOSS_KINDS, IndividualLossSpec
from src.report import MetricReport, MetricRow, RankEntry, render_suites
from src.settings import (
    FORMAT_STRUCTURED,
    FORMAT_TABLE,
    POLICY_ERROR,
    POLICY_SKIP,
    RuntimeSettings,
    load_runtime_settings,
)
from src.suites import SUITES, SuiteConfig, run_suites


class MetricsArgumentParser(argparse.ArgumentParser):
    # argparse would exit 2, which is EXIT_DATA here.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass(frozen=True)
class MetricSelection:
    name: str
    loss: IndividualLossSpec
    aggregator: AggregatorSpec


def _parse_param(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise InvalidSpecError(f"{what} parameter={text!r} is not a number") from exc


def parse_transform_chain(text: str) -> Tuple[TransformSpec, ...]:
    steps = []
    for part in text.split("+"):
        part = part.strip()
        if not part:
            continue
        kind, _, param = part.partition(":")
        kind = kind.strip().lower()
        if kind not in TRANSFORM_KINDS:
            raise InvalidSpecError(f"unknown_transform={kind}")
        steps.append(TransformSpec(kind, _parse_param(param, kind) if param else None))
    return tuple(steps)


def parse_aggregator(text: str, order: str = ASCENDING) -> AggregatorSpec:
    kind, _, param = text.strip().partition(":")
    kind = kind.lower()
    if kind in (ADDITIVE, MULTIPLICATIVE):
        if param:
            raise InvalidSpecError(f"aggregator {kind} takes no parameter")
        return AggregatorSpec(kind=kind)
    if kind == QUANTILE:
        if not param:
            raise InvalidSpecError("quantile aggregator needs quantile:<q>")
        return AggregatorSpec(kind=QUANTILE, q=_parse_param(param, QUANTILE))
    if kind == LTYPE:
        if not param:
            raise InvalidSpecError("ltype aggregator needs ltype:<coefficient file>")
        return AggregatorSpec(kind=LTYPE, coefficients=read_coefficients(param), order=order)
    raise InvalidSpecError(f"unknown_aggregator={kind}")


def parse_metric(text: str, zero_actual_policy: str, order: str = ASCENDING) -> MetricSelection:
    """A preset name, or `loss,aggregator[,transform chain]` such as `se,additive,mean+root:2`."""
    key = text.strip().upper()
    if key in PRESETS:
        kind, agg_spec = PRESETS[key]
        return MetricSelection(
            name=key,
            loss=IndividualLossSpec(kind=kind, zero_actual_policy=zero_actual_policy),
            aggregator=agg_spec,
        )
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (2, 3):
        raise InvalidSpecError(
            f"unknown_metric={text} (known: {', '.join(PRESETS)}, or loss,aggregator[,transform])"
        )
    kind = parts[0].lower()
    if kind not in LOSS_KINDS:
        raise InvalidSpecError(f"unknown_loss_kind={kind}")
    agg_spec = parse_aggregator(parts[1], order=order)
    if len(parts) == 3:
        agg_spec = agg_spec.with_transform(*parse_transform_chain(parts[2]))
    return MetricSelection(
        name=text.strip(),
        loss=IndividualLossSpec(kind=kind, zero_actual_policy=zero_actual_policy),
        aggregator=agg_spec,
    )


def _selections(args: argparse.Namespace, default: str) -> List[MetricSelection]:
    order = args.ltype_order
    selections = [parse_metric(m, args.zero_actual, order) for m in (args.metric or [])]
    if args.loss or args.agg:
        if not (args.loss and args.agg):
            raise UsageError("--loss and --agg must be given together")
        text = f"{args.loss},{args.agg}"
        if args.transform:
            text += f",{args.transform}"
        selections.append(parse_metric(text, args.zero_actual, order))
    elif args.transform:
        raise UsageError("--transform needs --loss and --agg")
    if not selections:
        selections.append(parse_metric(default, args.zero_actual, order))
    return selections


def _evaluate_rows(
    dataset: Dataset,
    selections: Sequence[MetricSelection],
    columns: Sequence[str],
) -> Tuple[List[MetricRow], List[dict]]:
    records = dataset.records()
    by_unit = {r.unit_id: r for r in records}
    rows: List[MetricRow] = []
    loss_rows: List[dict] = []
    for selection in selections:
        for column in columns:
            losses, result = evaluate_metric(selection.loss, selection.aggregator, records, column)
            rows.append(MetricRow(metric=selection.name, column=column, result=result))
            for unit_id, loss in zip(losses.unit_ids, losses.losses):
                record = by_unit[unit_id]
                loss_rows.append(
                    {
                        "metric": selection.name,
                        "column": column,
                        "aggregator": selection.aggregator.label(),
                        "unit_id": unit_id,
                        "loss_kind": selection.loss.kind,
                        "actual": repr(record.actual),
                        "prediction": repr(float(record.predictions[column])),
                        "loss": repr(loss),
                    }
                )
            log_event(
                "INFO",
                metric=selection.name,
                column=column,
                aggregator=result.spec_echo.label(),
                value=result.value_text(),
                n=result.n_units,
            )
    return rows, loss_rows


def _write_loss_table(path: Optional[str], loss_rows: List[dict]) -> None:
    if not path:
        return
    LossTableCsvLogger(path, truncate=True).extend(loss_rows)
    log_event("INFO", loss_table=path, rows=len(loss_rows))


def _finish(report: MetricReport, strict_degenerate: bool) -> int:
    print(report.render())
    for row in report.degenerate_rows:
        log_event("WARNING", degenerate_total=row.metric, column=row.column)
    if strict_degenerate and report.degenerate_rows:
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    dataset = parse_dataset(args.dataset, args.column or None)
    selections = _selections(args, default="MAPE")
    rows, loss_rows = _evaluate_rows(dataset, selections, dataset.column_names)
    _write_loss_table(args.loss_table, loss_rows)
    report = MetricReport(output_format=args.format, rows=rows, loss_rows=loss_rows)
    return _finish(report, args.strict_degenerate)


def rank_rows(rows: Sequence[MetricRow], rel_tol: float = 1e-9) -> List[RankEntry]:
    ordered = sorted(rows, key=lambda r: (order_key(r.result), r.column))
    groups: List[List[MetricRow]] = []
    for row in ordered:
        if groups and compare_totals(groups[-1][0].result, row.result, rel_tol=rel_tol) == 0:
            groups[-1].append(row)
        else:
            groups.append([row])
    entries: List[RankEntry] = []
    for group in groups:
        rank = len(entries) + 1
        entries.extend(RankEntry(rank=rank, row=row, tied=len(group) > 1) for row in group)
    return entries


def cmd_rank(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    dataset = parse_dataset(args.dataset, args.column or None)
    if len(dataset.column_names) < 2:
        raise UsageError(f"rank needs >= 2 prediction columns, got {dataset.column_names}")
    selections = _selections(args, default="MAPE")
    if len(selections) != 1:
        raise UsageError("rank takes exactly one metric")
    rows, loss_rows = _evaluate_rows(dataset, selections, dataset.column_names)
    _write_loss_table(args.loss_table, loss_rows)
    ranking = rank_rows(rows, rel_tol=settings.rank_tie_rel_tol)
    for entry in ranking:
        if entry.tied:
            log_event("INFO", tie_rank=entry.rank, column=entry.row.column)
    report = MetricReport(output_format=args.format, rows=rows, ranking=ranking, loss_rows=loss_rows)
    return _finish(report, args.strict_degenerate)


def cmd_verify(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    trials = settings.verify_trials if args.trials is None else args.trials
    if trials < 1:
        raise UsageError(f"trials={trials} must be >= 1")
    fisher_trials = settings.fisher_trials if args.fisher_trials is None else args.fisher_trials
    if fisher_trials < 1:
        raise UsageError(f"fisher_trials={fisher_trials} must be >= 1")
    names = args.suite or list(SUITES)

    config = SuiteConfig(
        seed=args.seed,
        trials=trials,
        fisher_trials=fisher_trials,
        perturbation_scale=settings.perturbation_scale,
        strict_rel_tol=settings.strict_rel_tol,
        log_base=settings.log_base,
        shift_margin=settings.shift_margin,
    )
    outcomes = run_suites(names, config)
    print(render_suites(outcomes, args.format))

    unmet = [o.suite for o in outcomes if not o.met]
    if unmet:
        log_event("ERROR", unexpected_verdicts=unmet, seed=args.seed)
        return EXIT_USAGE
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, settings: RuntimeSettings) -> None:
    parser.add_argument(
        "--format",
        choices=[FORMAT_TABLE, FORMAT_STRUCTURED],
        default=settings.output_format,
        help="Human table or line-delimited structured records",
    )
    parser.add_argument("--seed", type=int, default=0, help="Random seed for verification runs")
    parser.add_argument("--verbose", action="store_true", help="Print INFO events on stderr")


def _add_metric_flags(parser: argparse.ArgumentParser, settings: RuntimeSettings) -> None:
    parser.add_argument("dataset", help="CSV with unit_id, actual and prediction columns")
    parser.add_argument(
        "--column",
        action="append",
        help="Prediction column to use (repeatable; default: all)",
    )
    parser.add_argument(
        "--metric",
        action="append",
        help="Preset name (" + ", ".join(PRESETS) + ") or loss,aggregator[,transform]",
    )
    parser.add_argument("--loss", choices=list(LOSS_KINDS), help="Individual loss kind")
    parser.add_argument(
        "--agg",
        help="additive | multiplicative | quantile:<q> | ltype:<coefficient file>",
    )
    parser.add_argument(
        "--ltype-order",
        choices=[ASCENDING, DESCENDING],
        default=ASCENDING,
        help="Sort order the L-type coefficients apply to",
    )
    parser.add_argument(
        "--transform",
        help="Report transform chain, e.g. mean+root:2 (none|mean|geomean|root:<p>|scale:<c>|log:<b>)",
    )
    parser.add_argument(
        "--zero-actual",
        choices=[POLICY_SKIP, POLICY_ERROR],
        default=settings.zero_actual_policy,
        help="What percentage losses do with actual = 0",
    )
    parser.add_argument(
        "--strict-degenerate",
        action="store_true",
        help="Exit 3 when any multiplicative total is degenerate",
    )
    parser.add_argument("--loss-table", help="Write the per-unit loss table to this CSV path")


def build_parser(settings: RuntimeSettings) -> argparse.ArgumentParser:
    parser = MetricsArgumentParser(
        prog="python -m src.cli",
        description="Evaluate, rank and verify total-loss forecast accuracy metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    evaluate = sub.add_parser("evaluate", help="Compute metrics for each prediction column")
    _add_metric_flags(evaluate, settings)
    _add_common(evaluate, settings)
    evaluate.set_defaults(handler=cmd_evaluate)

    rank = sub.add_parser("rank", help="Rank prediction columns by one metric (lower is better)")
    _add_metric_flags(rank, settings)
    _add_common(rank, settings)
    rank.set_defaults(handler=cmd_rank)

    verify = sub.add_parser("verify", help="Run the randomized axiom suites")
    verify.add_argument(
        "--suite",
        action="append",
        choices=list(SUITES),
        help="Suite to run (repeatable; default: all)",
    )
    verify.add_argument("--trials", type=int, default=None, help="Random cases per suite family")
    verify.add_argument(
        "--fisher-trials",
        type=int,
        default=None,
        help="Perturbed prediction vectors per Fisher-consistency check",
    )
    _add_common(verify, settings)
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = load_runtime_settings()
    set_verbose(settings.verbose)
    try:
        parser = build_parser(settings)
        args = parser.parse_args(argv)
        if args.verbose:
            set_verbose(True)
        log_event(
            "SETTINGS",
            command=args.command,
            output_format=args.format,
            seed=args.seed,
            zero_actual_policy=getattr(args, "zero_actual", settings.zero_actual_policy),
            rank_tie_rel_tol=settings.rank_tie_rel_tol,
        )
        return args.handler(args, settings)
    except MetricsError as exc:
        log_event("ERROR", error=type(exc).__name__, message=str(exc))
        return exc.exit_code
    except OSError as exc:
        log_event("ERROR", error=type(exc).__name__, message=str(exc))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
