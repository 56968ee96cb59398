"""Factor return matrices and CSV ingestion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Input data violates the expected layout or content."""


@dataclass(frozen=True)
class DataMatrix:
    """N x T matrix of factor returns (one row per series)."""

    values: np.ndarray
    labels: tuple[str, ...]
    dates: tuple[str, ...] | None = None
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError("values must be a 2-D array (series x observations)")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.labels) != v.shape[0]:
            raise DataError(f"{len(self.labels)} labels for {v.shape[0]} series")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def t(self) -> int:
        return self.values.shape[1]

    def validate(self) -> "DataMatrix":
        """Check the invariants needed by ICA: T > N, finite, non-constant rows."""
        if self.t <= self.n:
            raise DataError(f"need more observations than series (T={self.t}, N={self.n})")
        bad = ~np.isfinite(self.values)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DataError(f"non-finite value in series {self.labels[i]!r} at column {j}")
        var = self.values.var(axis=1)
        for name, v in zip(self.labels, var):
            if not v > 0:
                raise DataError(f"series {name!r} has zero sample variance")
        return self

    def window(self, start: int, stop: int) -> "DataMatrix":
        dates = self.dates[start:stop] if self.dates is not None else None
        return DataMatrix(self.values[:, start:stop], self.labels, dates)

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "DataMatrix":
        """Build from a frame whose index is the date and columns the series."""
        dates = tuple(str(d) for d in df.index)
        return cls(df.to_numpy(dtype=float).T, tuple(df.columns), dates)


def log_returns(prices: DataMatrix) -> DataMatrix:
    p = prices.values
    if np.any(p <= 0):
        raise DataError("prices must be strictly positive for log returns")
    dates = prices.dates[1:] if prices.dates is not None else None
    return DataMatrix(np.diff(np.log(p), axis=1), prices.labels, dates, prices.dropped_rows)


def ingest_csv(
    path: str | Path,
    *,
    date_column: str | None = None,
    columns: list[str] | None = None,
    prices: bool = False,
    min_rows: int = 100,
) -> DataMatrix:
    """Read a CSV with a header row, ISO-8601 dates first, numeric series after.

    Rows with any empty cell are dropped (count kept in ``dropped_rows``).
    A non-empty cell that does not parse as a number raises DataError naming
    its row and column.  With ``prices=True`` the series are converted to
    log returns.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise DataError("CSV needs a date column and at least one series")
    date_col = date_column or raw.columns[0]
    if date_col not in raw.columns:
        raise DataError(f"date column {date_col!r} not found")
    series = columns or [c for c in raw.columns if c != date_col]
    missing = [c for c in series if c not in raw.columns]
    if missing:
        raise DataError(f"columns not found: {missing}")

    cells = raw[series].apply(lambda s: s.str.strip())
    empty = cells.eq("") | cells.isin(["NA", "NaN", "nan", "null"])
    numeric = cells.apply(pd.to_numeric, errors="coerce")
    unparsed = numeric.isna() & ~empty
    if unparsed.to_numpy().any():
        r, c = np.argwhere(unparsed.to_numpy())[0]
        # +2: one for the header line, one for 1-based numbering
        raise DataError(
            f"unparseable value {cells.iat[r, c]!r} at row {r + 2}, column {series[c]!r}"
        )
    dates = pd.to_datetime(raw[date_col].str.strip(), errors="coerce", format="ISO8601")
    if dates.isna().any():
        r = int(np.flatnonzero(dates.isna().to_numpy())[0])
        raise DataError(f"unparseable date {raw[date_col].iat[r]!r} at row {r + 2}")

    keep = ~empty.any(axis=1).to_numpy()
    dropped = int((~keep).sum())
    if dropped:
        log.info("dropped %d rows with missing values", dropped)
    frame = numeric.loc[keep]
    frame.index = dates[keep].dt.strftime("%Y-%m-%d")
    data = DataMatrix.from_frame(frame)
    data = DataMatrix(data.values, data.labels, data.dates, dropped)
    if prices:
        data = log_returns(data)
    if data.t < min_rows:
        raise DataError(f"only {data.t} usable rows (need at least {min_rows})")
    return data
