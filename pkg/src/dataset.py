from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src.errors import (
    DuplicateUnitIdError,
    EmptyFileError,
    MissingColumnError,
    NegativeInputError,
    NonFiniteInputError,
    NonNumericCellError,
)
from src.logger import log_event
from src.loss_core import PredictionRecord

UNIT_ID_COLUMN = "unit_id"
ACTUAL_COLUMN = "actual"

# Dot decimal separator only, whatever the process locale says.
_DECIMAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


@dataclass(frozen=True)
class Dataset:
    unit_ids: Tuple[str, ...]
    actuals: Tuple[float, ...]
    prediction_columns: Dict[str, Tuple[float, ...]]

    def __len__(self) -> int:
        return len(self.unit_ids)

    @property
    def column_names(self) -> List[str]:
        return list(self.prediction_columns)

    def records(self) -> List[PredictionRecord]:
        return [
            PredictionRecord(
                unit_id=unit_id,
                actual=self.actuals[i],
                predictions={name: values[i] for name, values in self.prediction_columns.items()},
            )
            for i, unit_id in enumerate(self.unit_ids)
        ]


def parse_number(cell: str, row: int, column: str) -> float:
    # Short rows come back from pandas as NaN floats, not strings.
    text = cell.strip() if isinstance(cell, str) else ""
    if not _DECIMAL.fullmatch(text):
        raise NonNumericCellError(row=row, column=column, cell=str(cell))
    value = float(text)
    if not math.isfinite(value):
        raise NonFiniteInputError(f"{column}[row={row}]", value)
    if value < 0:
        raise NegativeInputError(f"{column}[row={row}]", value)
    return value


def parse_dataset(path: str | Path, columns: Optional[Sequence[str]] = None) -> Dataset:
    """Read `unit_id,actual,<prediction columns...>` CSV text.

    `columns` restricts the prediction columns kept. Row numbers in errors are file
    line numbers, so the header is line 1. Rows with actual = 0 are kept.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise EmptyFileError(f"empty_file path={path}") from exc

    header = [str(c).strip() for c in df.columns]
    df.columns = header
    for required in (UNIT_ID_COLUMN, ACTUAL_COLUMN):
        if required not in header:
            raise MissingColumnError(required, header)

    available = [c for c in header if c not in (UNIT_ID_COLUMN, ACTUAL_COLUMN)]
    if columns:
        for name in columns:
            if name not in available:
                raise MissingColumnError(name, header)
        selected = list(columns)
    else:
        selected = available
    if not selected:
        raise MissingColumnError("<prediction column>", header)
    if df.empty:
        raise EmptyFileError(f"no data rows path={path}")

    unit_ids: List[str] = []
    seen: Dict[str, int] = {}
    actuals: List[float] = []
    predictions: Dict[str, List[float]] = {name: [] for name in selected}

    for offset, row in enumerate(df.itertuples(index=False)):
        line = offset + 2
        cells = dict(zip(header, row))
        unit_id = str(cells[UNIT_ID_COLUMN]).strip()
        if unit_id in seen:
            raise DuplicateUnitIdError(unit_id, line)
        seen[unit_id] = line
        unit_ids.append(unit_id)
        actuals.append(parse_number(cells[ACTUAL_COLUMN], line, ACTUAL_COLUMN))
        for name in selected:
            predictions[name].append(parse_number(cells[name], line, name))

    zero_actuals = sum(1 for a in actuals if a == 0.0)
    log_event(
        "INFO",
        dataset=str(path),
        rows=len(unit_ids),
        columns=selected,
        zero_actuals=zero_actuals,
    )
    return Dataset(
        unit_ids=tuple(unit_ids),
        actuals=tuple(actuals),
        prediction_columns={name: tuple(values) for name, values in predictions.items()},
    )


def read_coefficients(path: str | Path) -> Tuple[float, ...]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Coefficient file not found: {path}")
    values = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        text = line.strip()
        if not _DECIMAL.fullmatch(text):
            raise NonNumericCellError(row=line_no, column="coefficient", cell=line)
        values.append(float(text))
    if not values:
        raise EmptyFileError(f"empty_coefficient_file path={path}")
    return tuple(values)
