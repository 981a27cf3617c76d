from __future__ import annotations

from typing import Sequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGENERATE = 3


class MetricsError(ValueError):
    exit_code = EXIT_USAGE


class DataError(MetricsError):
    exit_code = EXIT_DATA


class UsageError(MetricsError):
    exit_code = EXIT_USAGE


class NonFiniteInputError(DataError):
    def __init__(self, name: str, value: float) -> None:
        super().__init__(f"non_finite_{name}={value}")
        self.name = name
        self.value = value


class NegativeInputError(DataError):
    def __init__(self, name: str, value: float) -> None:
        super().__init__(f"negative_{name}={value}")
        self.name = name
        self.value = value


class ZeroActualError(DataError):
    def __init__(self, unit_id: str = "") -> None:
        where = f" unit_id={unit_id}" if unit_id else ""
        super().__init__(f"zero_actual under a percentage loss{where}")
        self.unit_id = unit_id


class EmptyAfterFilteringError(DataError):
    pass


class EmptyVectorError(DataError):
    pass


class LengthMismatchError(DataError):
    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f"length_mismatch expected={expected} got={got}")
        self.expected = expected
        self.got = got


class NegativeCoefficientError(DataError):
    def __init__(self, index: int, value: float) -> None:
        super().__init__(f"negative_coefficient index={index} value={value}")
        self.index = index
        self.value = value


class NonPositiveLossError(DataError):
    def __init__(self, indices: Sequence[int]) -> None:
        self.indices = tuple(int(i) for i in indices)
        super().__init__(f"non_positive_loss indices={list(self.indices)}")


class LogOfNonPositiveError(DataError):
    def __init__(self, value: float) -> None:
        super().__init__(f"log_of_non_positive value={value}")
        self.value = value


class TagMismatchError(DataError):
    pass


class MissingColumnError(DataError):
    def __init__(self, column: str, available: Sequence[str]) -> None:
        super().__init__(
            f"Missing required column: {column}. Available columns: {', '.join(available)}"
        )
        self.column = column


class NonNumericCellError(DataError):
    def __init__(self, row: int, column: str, cell: str) -> None:
        super().__init__(f"non_numeric_cell row={row} column={column} cell={cell!r}")
        self.row = row
        self.column = column
        self.cell = cell


class DuplicateUnitIdError(DataError):
    def __init__(self, unit_id: str, row: int) -> None:
        super().__init__(f"duplicate_unit_id unit_id={unit_id} row={row}")
        self.unit_id = unit_id
        self.row = row


class EmptyFileError(DataError):
    pass


class QOutOfRangeError(UsageError):
    def __init__(self, q: float) -> None:
        super().__init__(f"q_out_of_range q={q} (expected 0 < q <= 1)")
        self.q = q


class DegenerateGridError(UsageError):
    pass


class NoNonMaximalLossError(UsageError):
    pass


class NoSlackPositionError(UsageError):
    pass


class InvalidSpecError(UsageError):
    pass
