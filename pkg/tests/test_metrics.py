"""Tests for rmse/nrmse and horizon evaluation."""

import pandas as pd
import pytest

from sgru_forecast.exceptions import ContractError, UndefinedMetricError
from sgru_forecast.metrics import EvalReport, evaluate_horizons, nrmse, reports_to_frame, rmse, write_eval_csv


class TestErrors:
    """Test the pointwise error metrics."""

    def test_rmse_hand_value(self):
        """rmse([1, 3], [3, 1]) = 2."""
        assert rmse([1.0, 3.0], [3.0, 1.0]) == 2.0

    def test_nrmse_hand_values(self):
        """nrmse divides rmse by |mean(y_true)|."""
        assert nrmse([1.0, 3.0], [3.0, 1.0]) == pytest.approx(1.0)
        assert nrmse([2.0, 2.0, 2.0], [3.0, 3.0, 3.0]) == pytest.approx(0.5)

    def test_nrmse_negative_mean(self):
        """A negative mean uses its absolute value."""
        assert nrmse([-2.0, -2.0], [-3.0, -3.0]) == pytest.approx(0.5)

    def test_scale_invariant(self):
        """Scaling both series leaves nrmse unchanged."""
        y, p = [1.0, 2.0, 4.0], [1.5, 2.5, 3.0]
        assert nrmse([10 * v for v in y], [10 * v for v in p]) == pytest.approx(nrmse(y, p))

    def test_zero_mean_is_undefined(self):
        """A zero-mean target raises and carries the rmse."""
        with pytest.raises(UndefinedMetricError) as excinfo:
            nrmse([-1.0, 1.0], [0.0, 0.0])
        assert excinfo.value.rmse == pytest.approx(1.0)

    def test_length_mismatch(self):
        """Series must have equal non-zero length."""
        with pytest.raises(ContractError):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(ContractError):
            rmse([], [])


class TestEvaluateHorizons:
    """Test cumulative evaluation at step cutoffs."""

    def test_cutoffs_beyond_horizon_are_skipped(self):
        """Cutoffs past the series are dropped and the full horizon closes the list."""
        y = [float(v) for v in range(1, 13)]
        report = evaluate_horizons(y, [v + 1.0 for v in y], "m")
        assert report.cutoffs == [5, 10, 12]
        assert report.scores[5] == pytest.approx(1.0 / 3.0)
        assert report.scores[12] == pytest.approx(1.0 / 6.5)

    def test_full_horizon_not_duplicated(self):
        """A horizon that is itself a cutoff appears once."""
        y = [float(v) for v in range(1, 31)]
        assert evaluate_horizons(y, y, "m").cutoffs == [5, 10, 15, 20, 25, 30]

    def test_rmse_substitution(self):
        """A zero-mean prefix falls back to rmse and is flagged."""
        report = evaluate_horizons([-1.0, 1.0], [0.0, 0.0], "m", cutoffs=[2])
        assert report.absolute == [2]
        assert report.scores[2] == pytest.approx(1.0)

    def test_horizon_shorter_than_every_cutoff(self):
        """A 3-step forecast is scored over its whole length."""
        report = evaluate_horizons([2.0, 2.0, 2.0], [1.0, 1.0, 1.0], "m")
        assert report.cutoffs == [3]
        assert report.scores[3] == pytest.approx(0.5)


class TestReportFrame:
    """Test tabular export."""

    def test_columns_and_marker(self, tmp_path):
        """One row per model, one column per cutoff, '*' on rmse cells."""
        reports = [EvalReport("sgru", {5: 0.1, 10: 0.2}), EvalReport("ar1", {5: 0.3, 10: 0.4}, absolute=[10])]
        frame = reports_to_frame(reports)
        assert list(frame.columns) == ["model", "5", "10"]
        assert frame["model"].tolist() == ["sgru", "ar1"]
        assert str(frame.loc[1, "10"]).endswith("*")

        written = pd.read_csv(write_eval_csv(reports, tmp_path / "eval.csv"))
        assert written["model"].tolist() == ["sgru", "ar1"]
