import datetime as dt

import numpy as np
import pytest

from supou import (
    DataError,
    OUParams,
    SeasonWindow,
    build_train_sample,
    ingest,
    write_csv_simple,
)
from _synth import simulate_station, write_eca_dir, write_csv_simple_file

ECA_SNIPPET = """\
EUROPEAN CLIMATE ASSESSMENT & DATASET (ECA&D)
blah blah header prose
 STAID, SOUID,    DATE,   TX, Q_TX
 11249,100001,19500615,  275,    0
 11249,100001,19500616,  312,    0
 11249,100001,19500617,-9999,    9
 11249,100001,19500618,  290,    1
"""

TN_SNIPPET = """\
header line
 STAID, SOUID,    DATE,   TN, Q_TN
 11249,100001,19500615,  141,    0
 11249,100001,19500616,  150,    0
 11249,100001,19500617,  160,    0
 11249,100001,19500618,  120,    0
"""


class TestEcaBlend:
    def test_tenths_sentinels_and_flags(self, tmp_path):
        d = tmp_path / "station"
        d.mkdir()
        (d / "TX_STAID011249.txt").write_text(ECA_SNIPPET)
        (d / "TN_STAID011249.txt").write_text(TN_SNIPPET)
        ds = ingest(d, "eca_blend")
        by_date = {str(day): i for i, day in enumerate(ds.dates)}
        i = by_date["1950-06-15"]
        assert ds.tmax[i] == pytest.approx(27.5)  # stored 275 tenths
        assert ds.tmin[i] == pytest.approx(14.1)
        assert ds.valid[i]
        # -9999 day: invalid, not -999.9 degrees
        j = by_date["1950-06-17"]
        assert not ds.valid[j]
        assert not np.isfinite(ds.tmax[j])
        # suspect flag (1): invalid
        k = by_date["1950-06-18"]
        assert not ds.valid[k]

    def test_malformed_row_reports_line(self, tmp_path):
        d = tmp_path / "station"
        d.mkdir()
        (d / "TX_STAID011249.txt").write_text(
            ECA_SNIPPET + " 11249,100001,BADDATE,  275,    0\n"
        )
        (d / "TN_STAID011249.txt").write_text(TN_SNIPPET)
        with pytest.raises(DataError, match=":8"):
            ingest(d, "eca_blend")

    def test_requires_directory(self, tmp_path):
        f = tmp_path / "TX_x.txt"
        f.write_text(ECA_SNIPPET)
        with pytest.raises(DataError):
            ingest(f, "eca_blend")

    def test_missing_element_file(self, tmp_path):
        d = tmp_path / "station"
        d.mkdir()
        (d / "TX_STAID011249.txt").write_text(ECA_SNIPPET)
        with pytest.raises(DataError, match="TN"):
            ingest(d, "eca_blend")

    def test_synthetic_round(self, tmp_path):
        rows = simulate_station(OUParams(47.5, 22.0, 0.02), [1950, 1951], seed=1)
        d = write_eca_dir(tmp_path / "synth", rows)
        ds = ingest(d, "eca_blend")
        assert ds.valid.sum() == len(rows)
        assert np.all(ds.tmin[ds.valid] <= ds.tmax[ds.valid])


class TestCsvSimple:
    def test_round_trip(self, tmp_path):
        rows = simulate_station(OUParams(47.5, 22.0, 0.02), [1960], seed=2)
        invalid = {rows[3][0]}
        src = write_csv_simple_file(tmp_path / "station.csv", rows, invalid_dates=invalid)
        ds = ingest(src, "csv_simple")
        out = tmp_path / "copy.csv"
        write_csv_simple(ds, out)
        ds2 = ingest(out, "csv_simple")
        assert np.array_equal(ds.dates, ds2.dates)
        assert np.array_equal(ds.valid, ds2.valid)
        assert np.allclose(ds.tmax[ds.valid], ds2.tmax[ds2.valid])
        assert (~ds.valid).sum() == 1

    def test_unknown_format(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("date,tmax,tmin\n")
        from supou import ConfigError

        with pytest.raises(ConfigError):
            ingest(f, "parquet")

    def test_missing_file(self):
        with pytest.raises(DataError):
            ingest("/nonexistent/file.csv", "csv_simple")

    def test_empty_data_rejected(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("date,tmax,tmin\n")
        with pytest.raises(DataError):
            ingest(f, "csv_simple")


class TestSeasonWindow:
    def test_default_is_61_days(self):
        assert SeasonWindow().dates_in_year(1950).size == 61

    def test_parse(self):
        assert SeasonWindow.parse("06-15") == (6, 15)
        from supou import ConfigError

        with pytest.raises(ConfigError):
            SeasonWindow.parse("junk")

    def test_invalid_window(self):
        from supou import ConfigError

        with pytest.raises(ConfigError):
            SeasonWindow(start=(2, 30), end=(8, 14))
        with pytest.raises(ConfigError):
            SeasonWindow(start=(8, 15), end=(6, 14))


@pytest.fixture(scope="module")
def full_station(tmp_path_factory):
    years = range(1950, 1985)
    rows = simulate_station(OUParams(47.5, 22.0, 0.02), years, seed=3, lead_days=0)
    d = write_eca_dir(tmp_path_factory.mktemp("eca") / "station", rows)
    return ingest(d, "eca_blend")


class TestBuildTrainSample:
    def test_full_35_years_gives_2135_days(self, full_station):
        data, report = build_train_sample(full_station, range(1950, 1985))
        assert data.n == 35 * 61 == 2135
        assert report.total_dropped == 0
        assert data.segment_lengths == tuple([61] * 35)

    def test_one_flagged_day_dropped_and_reported(self, tmp_path):
        years = [1950, 1951]
        rows = simulate_station(OUParams(47.5, 22.0, 0.02), years, seed=4, lead_days=0)
        bad = dt.date(1950, 7, 1)
        d = write_eca_dir(tmp_path / "station", rows, suspect_dates={bad})
        ds = ingest(d, "eca_blend")
        data, report = build_train_sample(ds, years)
        assert data.n == 2 * 61 - 1
        assert report.dropped == {1950: 1}
        # the gap splits 1950's season into two segments
        assert len(data.segment_lengths) == 3

    def test_empty_years_rejected(self, full_station):
        with pytest.raises(DataError):
            build_train_sample(full_station, [])

    def test_absent_years_rejected(self, full_station):
        with pytest.raises(DataError):
            build_train_sample(full_station, [1900])

    def test_mostly_missing_season_warns(self, tmp_path):
        rows = simulate_station(OUParams(47.5, 22.0, 0.02), [1950], seed=5, lead_days=0)
        missing = {r[0] for r in rows[:20]}
        d = write_eca_dir(tmp_path / "station", rows, missing_dates=missing)
        ds = ingest(d, "eca_blend")
        with pytest.warns(UserWarning, match="invalid or missing"):
            data, report = build_train_sample(ds, [1950])
        assert data.n == 41
        assert report.dropped[1950] == 20
