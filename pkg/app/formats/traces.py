"""CSV emission for per-iteration traces and experiment reports."""
from pathlib import Path
from typing import IO, List

import pandas as pd

from ..errors import OutputError
from ..models import TraceRow

TRACE_COLUMNS = ["algorithm", "junction", "seed", "iter", "temp_or_w", "rounded_eu", "soft_eu", "residual", "ms"]
FLOAT_FORMAT = "%.17g"


def trace_frame(rows: List[TraceRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=TRACE_COLUMNS)


def _write(df: pd.DataFrame, destination: str | Path | IO[str]) -> None:
    try:
        df.to_csv(destination, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise OutputError(f"cannot write {destination}: {e}") from e


def write_trace(rows: List[TraceRow], destination: str | Path | IO[str]) -> None:
    if not rows:
        raise ValueError("no trace rows to write")
    _write(trace_frame(rows), destination)


def write_report(report: pd.DataFrame, destination: str | Path | IO[str]) -> None:
    if report.empty:
        raise ValueError("empty report")
    _write(report, destination)
