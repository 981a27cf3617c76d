from __future__ import annotations

import csv
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable

LOSS_TABLE_FIELDS = [
    "metric",
    "column",
    "aggregator",
    "unit_id",
    "loss_kind",
    "actual",
    "prediction",
    "loss",
]

_ALWAYS_SHOWN = {"WARNING", "ERROR"}
_verbose = False


def set_verbose(enabled: bool) -> None:
    global _verbose
    _verbose = bool(enabled)


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(str(v) for v in value) + "]"
    text = str(value)
    return text if text else "-"


def log_event(tag: str, **fields: Any) -> None:
    if tag not in _ALWAYS_SHOWN and not _verbose:
        return
    parts = "".join(f" {key}={_format_value(value)}" for key, value in fields.items())
    print(f"{tag}:{parts}", file=sys.stderr)


class LossTableCsvLogger:
    def __init__(self, path: str = "outputs/loss_table.csv", truncate: bool = False) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if truncate:
            self._write_header()
            return
        self._ensure_header()

    def append(self, row: Dict[str, Any]) -> None:
        self.extend([row])

    def extend(self, rows: Iterable[Dict[str, Any]]) -> None:
        with self.path.open("a", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=LOSS_TABLE_FIELDS)
            for row in rows:
                writer.writerow({field: row.get(field, "") for field in LOSS_TABLE_FIELDS})

    def _ensure_header(self) -> None:
        if (not self.path.exists()) or self.path.stat().st_size == 0:
            self._write_header()
            return

        with self.path.open("r", newline="", encoding="utf-8") as f:
            first_line = f.readline().strip()
        if first_line == ",".join(LOSS_TABLE_FIELDS):
            return

        stamp = datetime.now(timezone.utc).strftime("%Y%m%d_%H%M%S")
        backup = self.path.with_name(f"{self.path.stem}_backup_{stamp}{self.path.suffix}")
        self.path.rename(backup)
        log_event("WARNING", loss_table_header_mismatch=str(self.path), backup=str(backup))
        self._write_header()

    def _write_header(self) -> None:
        with self.path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=LOSS_TABLE_FIELDS)
            writer.writeheader()
