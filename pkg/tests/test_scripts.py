from __future__ import annotations

import json

import pandas as pd
import pytest

from scripts import summarize_loss_table
from src.cli import main


def _evaluate(data_dir, table, capsys, *extra):
    argv = ["evaluate", str(data_dir / "two_units.csv"), "--format", "structured", "--loss-table", str(table)]
    main([*argv, *extra])
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.strip()]


def _summary_values(table, capsys):
    summarize_loss_table.main(["--csv", str(table)])
    lines = capsys.readouterr().out.splitlines()
    values = {}
    for line in lines[1:]:
        fields = dict(part.split("=", 1) for part in line.split(" "))
        values[(fields["metric"], fields["column"])] = (fields["aggregator"], float(fields["value"]))
    return values


def test_custom_quantile_metric_matches_report(data_dir, tmp_path, capsys):
    table = tmp_path / "losses.csv"
    [row] = _evaluate(data_dir, table, capsys, "--metric", "ape,quantile:1")
    assert row["value"] == 10.0
    assert _summary_values(table, capsys) == {("ape,quantile:1", "p1"): ("quantile:1", 10.0)}


def test_descending_ltype_metric_matches_report(data_dir, tmp_path, capsys):
    coefficients = tmp_path / "weights.txt"
    coefficients.write_text("1\n0\n", encoding="utf-8")
    table = tmp_path / "losses.csv"
    metric = f"ape,ltype:{coefficients}"
    [row] = _evaluate(data_dir, table, capsys, "--metric", metric, "--ltype-order", "desc")
    assert row["value"] == 10.0
    assert _summary_values(table, capsys)[(metric, "p1")] == ("ltype[2]:desc", 10.0)


def test_presets_match_report(data_dir, tmp_path, capsys):
    table = tmp_path / "losses.csv"
    rows = _evaluate(data_dir, table, capsys, "--metric", "MAPE", "--metric", "MEDAPE")
    summary = _summary_values(table, capsys)
    for row in rows:
        assert summary[(row["metric"], row["column"])][1] == pytest.approx(row["value"], rel=1e-12)


def test_unrebuildable_aggregator_is_refused(data_dir, tmp_path, capsys):
    table = tmp_path / "losses.csv"
    _evaluate(data_dir, table, capsys, "--metric", "ape,quantile:1")
    df = pd.read_csv(table, dtype=str)
    df["aggregator"] = "additive"
    df.to_csv(table, index=False)
    with pytest.raises(ValueError, match="table_aggregator=additive"):
        summarize_loss_table.main(["--csv", str(table)])
