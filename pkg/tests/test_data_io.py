import json
import math

import numpy as np
import pytest

from riskbench import (
    BacktestConfig,
    DataError,
    DomainError,
    GaussianParams,
    IngestionError,
    ReturnSeries,
    SeededRng,
    SimulationSpec,
    SizeError,
    fit_gaussian,
    load_returns_csv,
    rolling_backtest,
    simulate_series,
    write_report,
)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadReturnsCsv:
    def test_percent_scaling_and_dates(self, tmp_path):
        path = _write(
            tmp_path, "a.csv", "date,A\n20050127,1.0\n20050128,-0.5\n20050131,0.25\n"
        )
        series = load_returns_csv(path, "A", "percent")
        np.testing.assert_allclose(series.values, [0.01, -0.005, 0.0025])
        assert series.dates == ("2005-01-27", "2005-01-28", "2005-01-31")
        assert series.name == "A"

    def test_iso_dates(self, tmp_path):
        path = _write(tmp_path, "a.csv", "date,A\n2005-01-27,1.0\n2005-01-28,2.0\n")
        assert load_returns_csv(path, "A", "decimal").dates == ("2005-01-27", "2005-01-28")

    def test_decimal_scale_identity(self, tmp_path):
        path = _write(tmp_path, "a.csv", "date,A\n20050127,1.0\n20050128,-0.5\n")
        np.testing.assert_allclose(load_returns_csv(path, "A", "decimal").values, [1.0, -0.5])

    def test_missing_column_names_available(self, tmp_path):
        path = _write(tmp_path, "a.csv", "date,A,B\n20050127,1.0,2.0\n")
        with pytest.raises(IngestionError, match="available columns: date, A, B"):
            load_returns_csv(path, "Z", "decimal")

    def test_sentinel_rows_itemised(self, tmp_path):
        path = _write(
            tmp_path,
            "a.csv",
            "date,A\n20050127,1.0\n20050128,-99.99\n20050131,2.0\n20050201,-999\n",
        )
        with pytest.raises(IngestionError) as err:
            load_returns_csv(path, "A", "percent")
        assert "rows 3, 5" in str(err.value)

    def test_unparseable_cells_itemised(self, tmp_path):
        path = _write(tmp_path, "a.csv", "date,A\n20050127,x\n20050128,1.0\n")
        with pytest.raises(IngestionError, match="rows 2"):
            load_returns_csv(path, "A", "decimal")

    def test_no_date_column(self, tmp_path):
        path = _write(tmp_path, "a.csv", "ret\n0.5\n-0.25\n")
        series = load_returns_csv(path, "ret", "decimal")
        assert series.dates is None
        np.testing.assert_allclose(series.values, [0.5, -0.25])

    def test_numeric_first_column_not_mistaken_for_dates(self, tmp_path):
        path = _write(tmp_path, "a.csv", "idx,ret\n1,0.5\n2,-0.25\n")
        assert load_returns_csv(path, "ret", "decimal").dates is None

    def test_non_increasing_dates_rejected(self, tmp_path):
        path = _write(tmp_path, "a.csv", "date,A\n20050128,1.0\n20050127,2.0\n")
        with pytest.raises(IngestionError, match="strictly increasing"):
            load_returns_csv(path, "A", "decimal")

    def test_scale_required(self, tmp_path):
        path = _write(tmp_path, "a.csv", "ret\n0.5\n")
        with pytest.raises(DomainError):
            load_returns_csv(path, "ret", "bps")

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_returns_csv(tmp_path / "nope.csv", "A", "decimal")


class TestReturnSeries:
    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            ReturnSeries("x", [1.0, float("nan")])

    def test_date_length_mismatch(self):
        with pytest.raises(DataError):
            ReturnSeries("x", [1.0, 2.0], dates=("2020-01-01",))

    def test_len(self):
        assert len(ReturnSeries("x", [1.0, 2.0])) == 2


class TestFitGaussian:
    def test_hand_values(self):
        params = fit_gaussian(ReturnSeries("x", [0.0, 2.0]))
        assert params.mu == 1.0
        assert params.sigma == pytest.approx(math.sqrt(2.0))

    def test_degenerate_rejected(self):
        with pytest.raises(DataError):
            fit_gaussian(ReturnSeries("x", [1.0] * 5))

    def test_shift_equivariance(self):
        x = np.array([0.1, -0.2, 0.4, 0.0])
        a, b = fit_gaussian(x), fit_gaussian(x + 3.0)
        assert b.mu == pytest.approx(a.mu + 3.0)
        assert b.sigma == pytest.approx(a.sigma)

    def test_size(self):
        with pytest.raises(SizeError):
            fit_gaussian(ReturnSeries("x", [1.0]))


class TestSimulateSeries:
    def test_deterministic(self):
        spec = SimulationSpec(GaussianParams(0.1, 0.2), 1000, seed=5)
        a, b = simulate_series(spec), simulate_series(spec)
        assert np.array_equal(a.values, b.values)
        assert a.name == b.name and "seed=5" in a.name

    def test_moment_recovery(self):
        spec = SimulationSpec(GaussianParams(0.5, 2.0), 1_000_000, seed=6)
        values = simulate_series(spec).values
        assert values.mean() == pytest.approx(0.5, abs=3 * 2.0 / 1000.0)
        assert values.std(ddof=1) == pytest.approx(2.0, rel=0.01)

    def test_sigma_zero_rejected_upstream(self):
        with pytest.raises(DomainError):
            SimulationSpec(GaussianParams(0.0, 0.0), 10, seed=0)

    def test_length_validated(self):
        with pytest.raises(DomainError):
            SimulationSpec(GaussianParams(0.0, 1.0), 0, seed=0)


class TestWriteReport:
    @pytest.fixture()
    def report(self):
        series = simulate_series(SimulationSpec(GaussianParams(0.0, 1.0), 300, seed=9))
        config = BacktestConfig(alpha=0.1, methods=("emp", "norm"), window=50)
        return rolling_backtest(series, config)

    def test_json_round_trip_exact(self, report, tmp_path):
        path = tmp_path / "r.json"
        write_report(report, path, "json")
        assert json.loads(path.read_text()) == report.to_json_dict()

    def test_csv_numbers_exact(self, report, tmp_path):
        path = tmp_path / "r.csv"
        write_report(report, path, "csv")
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        row = dict(zip(header, lines[1].split(",")))
        assert float(row["exceedance_rate"]) == report.methods["empirical"].exceedance_rate
        assert float(row["var_mean_score"]) == report.methods["empirical"].var_mean_score

    def test_writers_deterministic(self, report, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_report(report, p1, "json")
        write_report(report, p2, "json")
        assert p1.read_bytes() == p2.read_bytes()

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(DomainError):
            write_report(report, tmp_path / "r.xml", "xml")
