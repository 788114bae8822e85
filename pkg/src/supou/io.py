"""Station temperature records: parsing, validation, train-sample assembly.

Two input layouts are supported.  `eca_blend` is the blended daily station
layout used by the European climate archive: one file per element (TX for
daily maxima, TN for minima), a free-text header block, then comma-separated
rows  STAID, SOUID, DATE, VALUE, Q_VALUE  with temperatures in tenths of a
degree, -9999 as the missing sentinel and quality flags 0 (valid),
1 (suspect), 9 (missing).  `csv_simple` is a plain  date,tmax,tmin  table in
degrees Celsius with ISO dates.

Invalid or missing days are flagged, never interpolated; they split the
pooled training sample into segments so that no day-to-day increment spans a
gap.
"""

from __future__ import annotations

import csv
import datetime as dt
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import ConfigError, DataError
from .process import DailyExtrema

_MISSING = -9999


@dataclass
class StationDataset:
    """Aligned daily series for one station; `valid` marks usable days."""

    station_id: str
    dates: np.ndarray  # datetime64[D]
    tmax: np.ndarray  # degC, NaN when invalid
    tmin: np.ndarray
    valid: np.ndarray  # bool

    def __post_init__(self):
        n = self.dates.size
        if not (self.tmax.size == self.tmin.size == self.valid.size == n):
            raise DataError("dataset columns must be aligned")
        if n == 0:
            raise DataError("dataset is empty")

    def years(self) -> np.ndarray:
        return self.dates.astype("datetime64[Y]").astype(int) + 1970


def _parse_eca_element(path: Path) -> dict[np.datetime64, float]:
    """DATE -> value (degC) for one ECA&D element file; invalid days absent."""
    out: dict[np.datetime64, float] = {}
    bad: list[str] = []
    with open(path, "r", errors="replace") as fh:
        in_data = False
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not in_data:
                # header block ends at the column-title line
                if stripped.upper().startswith("STAID"):
                    in_data = True
                continue
            if not stripped:
                continue
            parts = [p.strip() for p in stripped.split(",")]
            if len(parts) < 5:
                bad.append(f"{path.name}:{line_no}: expected 5 fields, got {len(parts)}")
                continue
            try:
                date = np.datetime64(
                    dt.datetime.strptime(parts[2], "%Y%m%d").date(), "D"
                )
                value = int(parts[3])
                flag = int(parts[4])
            except ValueError:
                bad.append(f"{path.name}:{line_no}: unparseable row {stripped!r}")
                continue
            if value == _MISSING or flag != 0:
                continue
            out[date] = value / 10.0
    if bad:
        raise DataError(
            f"{len(bad)} malformed rows in {path.name}; first: " + "; ".join(bad[:5])
        )
    return out


def _find_element_file(directory: Path, prefix: str) -> Path:
    hits = sorted(directory.glob(f"{prefix}_*.txt")) + sorted(
        directory.glob(f"{prefix}*.txt")
    )
    if not hits:
        raise DataError(f"no {prefix} element file found in {directory}")
    return hits[0]


def _ingest_eca_blend(path: Path) -> StationDataset:
    if path.is_dir():
        tx_path = _find_element_file(path, "TX")
        tn_path = _find_element_file(path, "TN")
    else:
        raise DataError(
            "eca_blend input must be a directory holding the station's TX and TN files"
        )
    tx = _parse_eca_element(tx_path)
    tn = _parse_eca_element(tn_path)
    if not tx and not tn:
        raise DataError(f"no valid observations in {path}")
    all_dates = np.array(sorted(set(tx) | set(tn)), dtype="datetime64[D]")
    tmax = np.full(all_dates.size, np.nan)
    tmin = np.full(all_dates.size, np.nan)
    for i, d in enumerate(all_dates):
        if d in tx:
            tmax[i] = tx[d]
        if d in tn:
            tmin[i] = tn[d]
    valid = ~np.isnan(tmax) & ~np.isnan(tmin) & (tmin <= tmax)
    station = tx_path.stem.split("_", 1)[-1] if "_" in tx_path.stem else tx_path.stem
    return StationDataset(station, all_dates, tmax, tmin, valid)


def _ingest_csv_simple(path: Path) -> StationDataset:
    dates, tmax, tmin = [], [], []
    bad: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path} is empty")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                bad.append(f"{path.name}:{line_no}: expected 3 fields")
                continue
            try:
                dates.append(np.datetime64(row[0].strip(), "D"))
            except ValueError:
                bad.append(f"{path.name}:{line_no}: bad date {row[0]!r}")
                continue
            def _num(cell: str) -> float:
                cell = cell.strip()
                return float(cell) if cell else np.nan
            try:
                tmax.append(_num(row[1]))
                tmin.append(_num(row[2]))
            except ValueError:
                bad.append(f"{path.name}:{line_no}: bad value")
                dates.pop()
                continue
    if bad:
        raise DataError(f"{len(bad)} malformed rows; first: " + "; ".join(bad[:5]))
    if not dates:
        raise DataError(f"no data rows in {path}")
    tmax = np.array(tmax)
    tmin = np.array(tmin)
    valid = ~np.isnan(tmax) & ~np.isnan(tmin) & (tmin <= tmax)
    return StationDataset(path.stem, np.array(dates, dtype="datetime64[D]"), tmax, tmin, valid)


def ingest(path: str | Path, format: str) -> StationDataset:
    """Load a station file (or ECA&D element directory) into a StationDataset."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"input path does not exist: {path}")
    if format == "eca_blend":
        return _ingest_eca_blend(path)
    if format == "csv_simple":
        return _ingest_csv_simple(path)
    raise ConfigError(f"unknown input format {format!r}")


def write_csv_simple(dataset: StationDataset, path: str | Path) -> None:
    """Inverse of the csv_simple reader; invalid days get empty value fields."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "tmax", "tmin"])
        for d, hi, lo, ok in zip(dataset.dates, dataset.tmax, dataset.tmin, dataset.valid):
            if ok:
                writer.writerow([str(d), repr(float(hi)), repr(float(lo))])
            else:
                writer.writerow([str(d), "", ""])


@dataclass(frozen=True)
class SeasonWindow:
    """Within-year observation window as (month, day) endpoints, inclusive."""

    start: tuple[int, int] = (6, 15)
    end: tuple[int, int] = (8, 14)

    def __post_init__(self):
        try:
            dt.date(2001, *self.start)
            dt.date(2001, *self.end)
        except ValueError as exc:
            raise ConfigError(f"invalid season window: {exc}") from None
        if dt.date(2001, *self.start) > dt.date(2001, *self.end):
            raise ConfigError("season window start must not be after its end")

    def dates_in_year(self, year: int) -> np.ndarray:
        first = dt.date(year, *self.start)
        last = dt.date(year, *self.end)
        n = (last - first).days + 1
        return np.datetime64(first, "D") + np.arange(n)

    @staticmethod
    def parse(mmdd: str) -> tuple[int, int]:
        try:
            month, day = (int(p) for p in mmdd.split("-"))
        except ValueError:
            raise ConfigError(f"season bound must look like 'MM-DD', got {mmdd!r}") from None
        return month, day


@dataclass
class DropReport:
    """Bookkeeping of invalid/missing days removed per season."""

    dropped: dict[int, int] = field(default_factory=dict)
    total_kept: int = 0

    @property
    def total_dropped(self) -> int:
        return sum(self.dropped.values())


def build_train_sample(
    ds: StationDataset,
    years,
    window: SeasonWindow | None = None,
) -> tuple[DailyExtrema, DropReport]:
    """Pool the season windows of the given years into one extrema sample.

    Days are kept in calendar order; invalid days are dropped (counted in the
    report) and, like year boundaries, start a new segment so that no
    increment is taken across a gap.  A season missing more than 10% of its
    days triggers a warning; an empty result is an error.
    """
    window = window or SeasonWindow()
    years = sorted(int(y) for y in years)
    if not years:
        raise DataError("no training years given")
    by_date = {d: i for i, d in enumerate(ds.dates)}
    sup_parts: list[float] = []
    inf_parts: list[float] = []
    segments: list[int] = []
    report = DropReport()
    for year in years:
        season_dates = window.dates_in_year(year)
        season_len = season_dates.size
        run = 0
        kept = 0
        for d in season_dates:
            i = by_date.get(d)
            if i is not None and ds.valid[i]:
                sup_parts.append(float(ds.tmax[i]))
                inf_parts.append(float(ds.tmin[i]))
                run += 1
                kept += 1
            else:
                if run:
                    segments.append(run)
                run = 0
        if run:
            segments.append(run)
        dropped = season_len - kept
        if dropped:
            report.dropped[year] = dropped
        if dropped > 0.1 * season_len:
            warnings.warn(
                f"season {year}: {dropped}/{season_len} days invalid or missing",
                stacklevel=2,
            )
        report.total_kept += kept
    if not sup_parts:
        raise DataError("no valid days in the requested training seasons")
    data = DailyExtrema(
        sup=np.array(sup_parts),
        inf=np.array(inf_parts),
        h=1.0,
        segment_lengths=tuple(segments),
    )
    return data, report
