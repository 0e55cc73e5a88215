"""Return series containers, CSV/TSV panel ingest and descriptive statistics."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence, TextIO

import numpy as np

from .errors import DomainError, InsufficientDataError, ParseError

logger = logging.getLogger(__name__)

MIN_LENGTH = 6


def _check_times(times: Sequence) -> tuple:
    times = tuple(times)
    for a, b in zip(times, times[1:]):
        if not a < b:
            raise ParseError(f"time labels not strictly increasing at {b!r}")
    return times


@dataclass(frozen=True)
class ReturnSeries:
    asset_id: str
    times: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", _check_times(self.times))
        if values.ndim != 1 or len(values) != len(self.times):
            raise ValueError("values must be 1-d and match times")
        if not np.all(np.isfinite(values)):
            raise DomainError(f"{self.asset_id}: non-finite value in series")
        if len(values) < MIN_LENGTH:
            raise InsufficientDataError(
                f"{self.asset_id}: series length {len(values)} < {MIN_LENGTH}"
            )

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_values(cls, values, asset_id: str = "x") -> "ReturnSeries":
        """Series with integer period labels 0..T-1."""
        values = np.asarray(values, dtype=float)
        return cls(asset_id, tuple(range(len(values))), values)


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned observations, one column per asset (T x N)."""

    assets: tuple
    times: tuple
    values: np.ndarray
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "assets", tuple(str(a) for a in self.assets))
        object.__setattr__(self, "times", _check_times(self.times))
        if len(set(self.assets)) != len(self.assets):
            raise ValueError("asset identifiers must be unique")
        if values.shape != (len(self.times), len(self.assets)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.times)} times x {len(self.assets)} assets"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("panel contains non-finite values")
        if len(self.times) < MIN_LENGTH:
            raise InsufficientDataError(
                f"panel has {len(self.times)} rows, need at least {MIN_LENGTH}"
            )

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def length(self) -> int:
        return len(self.times)

    def series(self, asset) -> ReturnSeries:
        k = asset if isinstance(asset, int) else self.assets.index(asset)
        return ReturnSeries(self.assets[k], self.times, self.values[:, k])

    def __iter__(self) -> Iterator[ReturnSeries]:
        for k in range(self.n_assets):
            yield self.series(k)

    def slice(self, start: int, stop: int) -> "ReturnPanel":
        return ReturnPanel(self.assets, self.times[start:stop], self.values[start:stop])

    @classmethod
    def from_series(cls, series: Sequence[ReturnSeries]) -> "ReturnPanel":
        times = series[0].times
        for s in series[1:]:
            if s.times != times:
                raise ValueError(f"{s.asset_id}: time labels differ from {series[0].asset_id}")
        return cls(
            tuple(s.asset_id for s in series),
            times,
            np.column_stack([s.values for s in series]),
        )


@dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    median: float
    maximum: float
    minimum: float
    std_dev: float
    skewness: float | None
    excess_kurtosis: float | None


# --------------------------------------------------------------------------- #
# ingest


def _parse_time(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return dt.date.fromisoformat(token)
    except ValueError:
        return dt.datetime.fromisoformat(token)


def load_panel(source, missing: str = "", delimiter: str | None = None) -> ReturnPanel:
    """Read a delimiter-separated panel: time column first, one column per asset.

    ``source`` is a path or an open text stream. The delimiter is detected
    from the header (tab if present, otherwise comma) unless given. Rows with
    any cell equal to ``missing`` are dropped; the count lands in
    ``panel.dropped_rows``.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return _read_panel(fh, missing, delimiter)
    return _read_panel(source, missing, delimiter)


def _read_panel(fh: TextIO, missing: str, delimiter: str | None) -> ReturnPanel:
    text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty input", line=1)
    if delimiter is None:
        delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    if len(header) < 2:
        raise ParseError("header needs a time column and at least one asset", line=1)
    assets = header[1:]
    if len(set(assets)) != len(assets):
        raise ParseError("duplicate asset identifiers in header", line=1)

    times, rows, dropped = [], [], 0
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        cells = [c.strip() for c in row]
        try:
            t = _parse_time(cells[0])
        except ValueError:
            raise ParseError(f"bad time label {cells[0]!r}", line=lineno) from None
        if any(c == missing for c in cells[1:]):
            dropped += 1
            continue
        try:
            vals = [float(c) for c in cells[1:]]
        except ValueError:
            bad = next(c for c in cells[1:] if not _is_float(c))
            raise ParseError(f"non-numeric cell {bad!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite cell", line=lineno)
        times.append(t)
        rows.append(vals)

    if dropped:
        logger.warning("dropped %d row(s) with missing values", dropped)
    if len(rows) < MIN_LENGTH:
        raise InsufficientDataError(
            f"{len(rows)} complete rows after dropping {dropped}, need at least {MIN_LENGTH}"
        )
    if len({type(t) for t in times}) > 1:
        raise ParseError("mixed time label types")
    return ReturnPanel(tuple(assets), tuple(times), np.array(rows), dropped_rows=dropped)


def _is_float(c: str) -> bool:
    try:
        float(c)
        return True
    except ValueError:
        return False


def write_panel(panel: ReturnPanel, fh: TextIO, delimiter: str = ",") -> None:
    w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
    w.writerow(["time", *panel.assets])
    for t, row in zip(panel.times, panel.values):
        label = t.isoformat() if hasattr(t, "isoformat") else t
        w.writerow([label, *(repr(float(v)) for v in row)])


# --------------------------------------------------------------------------- #
# transforms and statistics


def _returns(p: np.ndarray, mode: str, assets=None, times=None) -> np.ndarray:
    if mode == "log":
        bad = np.argwhere(p <= 0)
        if bad.size:
            idx = tuple(bad[0])
            if assets is not None:
                where = f"asset {assets[idx[1]]} at {times[idx[0]]}"
            else:
                where = f"position {idx[0]}"
            raise DomainError(f"nonpositive price {p[idx]} for {where}")
        return np.log(p[1:] / p[:-1])
    if mode == "simple":
        return p[1:] / p[:-1] - 1.0
    raise ValueError(f"unknown return mode {mode!r}")


def prices_to_returns(prices, mode: str = "log"):
    """Log (ln p_t/p_{t-1}) or simple (p_t/p_{t-1} - 1) returns; length drops by one.

    Accepts a price panel (returns a ReturnPanel) or a plain array.
    """
    if isinstance(prices, ReturnPanel):
        r = _returns(prices.values, mode, prices.assets, prices.times)
        return ReturnPanel(prices.assets, prices.times[1:], r)
    return _returns(np.asarray(prices, dtype=float), mode)


def describe(series) -> DescriptiveStats:
    """Sample statistics with n-1 normalised std; kurtosis is excess (normal = 0)."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    n = len(x)
    if n < 2:
        raise InsufficientDataError("describe needs at least 2 observations")
    if np.ptp(x) == 0.0:
        mean, dev = float(x[0]), np.zeros_like(x)
    else:
        mean = float(np.mean(x))
        dev = x - mean
    std = float(np.sqrt(np.sum(dev * dev) / (n - 1)))
    if std == 0.0:
        skew = kurt = None
    else:
        z = dev / std
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4)) - 3.0
    return DescriptiveStats(
        mean=mean,
        median=float(np.median(x)),
        maximum=float(np.max(x)),
        minimum=float(np.min(x)),
        std_dev=std,
        skewness=skew,
        excess_kurtosis=kurt,
    )


STATS_COLUMNS = ("Mean", "Median", "Maximum", "Minimum", "Std. Dev.", "Skewness", "Kurtosis")


def format_stats(panel: ReturnPanel, delimiter: str = "\t", digits: int = 4) -> str:
    """One row per asset with the seven summary columns; undefined moments print as NA."""

    def fmt(v):
        return "NA" if v is None else f"{v:.{digits}f}"

    out = [delimiter.join(("Asset", *STATS_COLUMNS))]
    for s in panel:
        d = describe(s)
        vals = (d.mean, d.median, d.maximum, d.minimum, d.std_dev, d.skewness, d.excess_kurtosis)
        out.append(delimiter.join((s.asset_id, *(fmt(v) for v in vals))))
    return "\n".join(out) + "\n"
