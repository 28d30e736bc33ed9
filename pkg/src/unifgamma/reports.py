"""CSV report rows shared by the library tables and the command line."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

COLUMNS = ("experiment_id", "parameter", "value", "std_error", "truncation", "seed")


def fmt(x) -> str:
    """Locale-free, round-trip formatting ('.' decimal separator)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return repr(float(x))
    return str(x)


@dataclass(frozen=True)
class ReportRow:
    experiment_id: str
    parameter: str
    value: object
    std_error: float = 0.0
    truncation: int = 0
    seed: int = 0

    def cells(self) -> list[str]:
        return [fmt(getattr(self, c)) for c in COLUMNS]


def write_rows(path, rows: Iterable[ReportRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow(r.cells())


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
