from __future__ import annotations

import argparse
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from src.aggregators import ASCENDING, LTYPE, AggregatorSpec, aggregate
from src.cli import parse_metric
from src.errors import MetricsError
from src.logger import LOSS_TABLE_FIELDS
from src.loss_core import LossVector
from src.settings import POLICY_SKIP


def rebuild_spec(metric: str, aggregator: str) -> AggregatorSpec:
    base = aggregator.split("/", 1)[0]
    order = base.rsplit(":", 1)[1] if base.startswith(LTYPE) else ASCENDING
    try:
        spec = parse_metric(metric, POLICY_SKIP, order=order).aggregator
    except MetricsError as exc:
        raise ValueError(f"metric={metric} aggregator={aggregator} cannot be rebuilt: {exc}") from exc
    if spec.label() != aggregator:
        raise ValueError(f"metric={metric} rebuilt_aggregator={spec.label()} table_aggregator={aggregator}")
    return spec


def summarize(df: pd.DataFrame) -> List[str]:
    missing = [c for c in LOSS_TABLE_FIELDS if c not in df.columns]
    if missing:
        raise ValueError(f"Missing required loss table columns: {missing}")

    lines = [f"rows={len(df)}"]
    for (metric, column, aggregator), group in df.groupby(["metric", "column", "aggregator"], sort=False):
        spec = rebuild_spec(str(metric), str(aggregator))
        losses = LossVector.of(group["loss"].astype(float).tolist())
        result = aggregate(losses, spec)
        lines.append(
            f"metric={metric} column={column} aggregator={spec.label()}"
            f" n={len(losses)} value={result.value_text()}"
        )
    return lines


def main(argv: Optional[Sequence[str]] = None) -> None:
    parser = argparse.ArgumentParser(description="Re-aggregate a per-unit loss table.")
    parser.add_argument("--csv", default="outputs/loss_table.csv", help="Path to loss_table.csv")
    args = parser.parse_args(argv)

    csv_path = Path(args.csv)
    if not csv_path.exists():
        raise FileNotFoundError(f"CSV not found: {csv_path}")

    # round_trip keeps every loss bit-identical to the repr() that was written.
    df = pd.read_csv(
        csv_path,
        dtype={"unit_id": str, "metric": str, "column": str, "aggregator": str},
        float_precision="round_trip",
    )
    for line in summarize(df):
        print(line)


if __name__ == "__main__":
    main()
