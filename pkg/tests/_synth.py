"""Synthetic station files in the supported input layouts, for tests."""

from __future__ import annotations

import datetime as dt
from pathlib import Path

from supou import OUParams, simulate_daily_extrema

HEADER = """\
EUROPEAN CLIMATE ASSESSMENT & DATASET (ECA&D), file created on this machine
THIS IS SYNTHETIC TEST DATA IN THE BLENDED-SERIES LAYOUT
Temperature values are in 0.1 degrees Celsius
-9999 denotes a missing value

 STAID, SOUID,    DATE,   {elem}, Q_{elem}
"""


def season_dates(year: int, lead_days: int = 1):
    """Jun-15 .. Aug-14 plus `lead_days` days before the window."""
    first = dt.date(year, 6, 15) - dt.timedelta(days=lead_days)
    last = dt.date(year, 8, 14)
    n = (last - first).days + 1
    return [first + dt.timedelta(days=d) for d in range(n)]


def simulate_station(params: OUParams, years, seed: int = 0, lead_days: int = 1):
    """(date, tmax, tmin) rows for each year's season window."""
    rows = []
    for k, year in enumerate(sorted(years)):
        dates = season_dates(year, lead_days)
        ext = simulate_daily_extrema(params, len(dates), dt=1e-2, seed=seed * 100_003 + k)
        for d, hi, lo in zip(dates, ext.sup, ext.inf):
            rows.append((d, float(hi), float(lo)))
    return rows


def write_eca_dir(
    directory: Path,
    rows,
    staid: int = 11249,
    missing_dates=(),
    suspect_dates=(),
) -> Path:
    """TX_/TN_ element files in the blended layout (tenths of a degree)."""
    directory.mkdir(parents=True, exist_ok=True)
    missing = set(missing_dates)
    suspect = set(suspect_dates)
    for elem, col in (("TX", 1), ("TN", 2)):
        lines = [HEADER.format(elem=elem)]
        for row in rows:
            date = row[0]
            stamp = f"{date:%Y%m%d}"
            if date in missing:
                value, flag = -9999, 9
            elif date in suspect:
                value, flag = int(round(row[col] * 10)), 1
            else:
                value, flag = int(round(row[col] * 10)), 0
            lines.append(f"{staid:6d},100001,{stamp},{value:5d},{flag:5d}\n")
        (directory / f"{elem}_STAID{staid:06d}.txt").write_text("".join(lines))
    return directory


def write_csv_simple_file(path: Path, rows, invalid_dates=()) -> Path:
    invalid = set(invalid_dates)
    lines = ["date,tmax,tmin\n"]
    for date, hi, lo in rows:
        if date in invalid:
            lines.append(f"{date.isoformat()},,\n")
        else:
            lines.append(f"{date.isoformat()},{hi!r},{lo!r}\n")
    path.write_text("".join(lines))
    return path
