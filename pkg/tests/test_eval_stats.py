"""
Tests for MAPE, cross-validation, the Mann-Whitney U test and KDE.
"""

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from adaptive_pinn.models.report import RobustnessReport, UTestMethod
from adaptive_pinn.services.eval_stats import (
    ROBUSTNESS_COLUMNS,
    FittedModel,
    ModelSpec,
    histogram,
    kde,
    kfold_cv,
    kfold_indices,
    mann_whitney_u,
    mape,
    monte_carlo_cv,
    robustness_frame,
    silverman_bandwidth,
    variance_ordering_warning,
    within_margin,
)
from adaptive_pinn.utils.validation import NumericalError, ShapeMismatchError, ValidationError


class _Constant(FittedModel):
    def __init__(self, value: float, epochs: int = 0):
        self.value = value
        self.epochs = epochs

    def predict(self, features):
        return np.full(len(features), self.value)


class MeanSpec(ModelSpec):
    """Predicts the training-target mean."""

    name = "mean"

    def fit(self, train, seed):
        return _Constant(float(train.raw_targets().mean()), epochs=3)


class FlakySpec(MeanSpec):
    """Fails on the listed seeds."""

    name = "flaky"

    def __init__(self, failing):
        self.failing = set(failing)

    def fit(self, train, seed):
        if seed in self.failing:
            raise NumericalError(f"seed {seed}")
        return super().fit(train, seed)


class TestMape:
    """Test the error metric."""

    def test_value(self):
        """Test mean(|pred - true| / |true|)."""
        result = mape([2.0, 4.0, -5.0], [2.2, 3.0, -5.0])
        assert result.mape == pytest.approx((0.1 + 0.25 + 0.0) / 3)
        np.testing.assert_allclose(result.errors, [0.1, 0.25, 0.0])

    def test_within_margin(self):
        """Test the fraction of points within 8%."""
        assert within_margin([1.0, 1.0, 1.0, 1.0], [1.05, 1.07, 1.2, 0.9]) == 0.5

    def test_zero_truth(self):
        """Test that a zero ground truth names its index."""
        with pytest.raises(ValidationError, match="index 1"):
            mape([1.0, 0.0], [1.0, 1.0])

    def test_length_mismatch(self):
        """Test that inputs of different length are rejected."""
        with pytest.raises(ShapeMismatchError):
            mape([1.0, 2.0], [1.0])

    def test_empty(self):
        """Test that an empty sample is rejected."""
        with pytest.raises(ValidationError):
            mape([], [])

    def test_non_finite_prediction(self):
        """Test that a NaN prediction is reported instead of averaged."""
        with pytest.raises(ValidationError, match="MAPE predictions contains a non-finite entry at index \\(1,\\)"):
            mape([1.0, 2.0], [1.0, np.nan])


class TestKFold:
    """Test k-fold cross-validation."""

    def test_partition(self):
        """Test that folds are disjoint, exhaustive and balanced."""
        folds = kfold_indices(23, 5, 0)
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        assert sorted(np.concatenate(folds).tolist()) == list(range(23))

    @pytest.mark.parametrize("n,k", [(10, 1), (3, 4)])
    def test_invalid_k(self, n, k):
        """Test k < 2 and k > N."""
        with pytest.raises(ValidationError):
            kfold_indices(n, k, 0)

    def test_cv_summary(self, sodium):
        """Test the mean and population stddev of the fold errors."""
        summary = kfold_cv(MeanSpec(), sodium, k=5, seed=1)
        assert summary.k == 5
        assert len(summary.fold_mapes) == 5
        assert summary.mean == pytest.approx(np.mean(summary.fold_mapes))
        assert summary.std == pytest.approx(np.std(summary.fold_mapes))

    def test_cv_deterministic(self, sodium):
        """Test that the same seed gives the same folds and errors."""
        assert kfold_cv(MeanSpec(), sodium, 5, 4).fold_mapes == kfold_cv(MeanSpec(), sodium, 5, 4).fold_mapes


class TestMonteCarlo:
    """Test Monte Carlo robustness validation."""

    def test_report(self, sodium):
        """Test trial counts, epochs and the normalized variance."""
        report = monte_carlo_cv(MeanSpec(), sodium, trials=6, holdout_fraction=0.2, seed=0)
        assert report.model == "mean"
        assert report.trials == 6
        assert report.failures == 0
        assert report.avg_epochs == 3.0
        assert report.max_var_pred_raw > 0.0
        assert report.max_var_pred == pytest.approx(report.max_var_pred_raw / np.var(sodium.raw_targets()))

    def test_parallel_matches_serial(self, sodium):
        """Test that worker threads do not change the result."""
        serial = monte_carlo_cv(MeanSpec(), sodium, trials=5, seed=2, jobs=1)
        parallel = monte_carlo_cv(MeanSpec(), sodium, trials=5, seed=2, jobs=3)
        assert serial.model_dump() == parallel.model_dump()

    def test_failed_trials_counted(self, sodium):
        """Test that failed trials are skipped and counted."""
        report = monte_carlo_cv(FlakySpec({0, 2}), sodium, trial_seeds=[0, 1, 2, 3, 4, 5])
        assert report.trials == 6
        assert report.failures == 2

    def test_too_few_successes(self, sodium):
        """Test that fewer than two successful trials is a numerical error."""
        with pytest.raises(NumericalError):
            monte_carlo_cv(FlakySpec({0, 1, 2}), sodium, trial_seeds=[0, 1, 2, 3])

    def test_needs_two_trials(self, sodium):
        """Test that a single trial is rejected."""
        with pytest.raises(ValidationError):
            monte_carlo_cv(MeanSpec(), sodium, trials=1)

    def test_frame_and_ordering(self):
        """Test the robustness table and the variance ordering check."""
        common = dict(max_var_pred_raw=1.0, max_var_mape=0.1, avg_epochs=10.0, trials=5)
        pinn = RobustnessReport(model="PINN", max_var_pred=0.5, **common)
        nn = RobustnessReport(model="NN", max_var_pred=0.2, **common)

        frame = robustness_frame([pinn, nn])
        assert list(frame.columns) == ROBUSTNESS_COLUMNS
        assert frame["model"].tolist() == ["PINN", "NN"]
        assert not variance_ordering_warning({"PINN": pinn, "NN": nn})
        assert variance_ordering_warning({"PINN": nn, "NN": pinn})
        assert variance_ordering_warning({"NN": nn})


class TestMannWhitney:
    """Test the U test."""

    def test_separated_samples_exact(self):
        """Test U = 0 and p = 2 / C(6, 3) for fully separated samples."""
        result = mann_whitney_u([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
        assert result.method is UTestMethod.EXACT
        assert result.u == 0.0
        assert result.p_value == pytest.approx(0.1)

    def test_exact_matches_scipy(self):
        """Test the exact p-value against scipy on tie-free data."""
        a = [1.1, 3.4, 2.2, 5.0]
        b = [4.1, 6.3, 7.7, 0.5, 8.8]
        result = mann_whitney_u(a, b)
        reference = mannwhitneyu(a, b, alternative="two-sided", method="exact")
        assert result.u == pytest.approx(reference.statistic)
        assert result.p_value == pytest.approx(reference.pvalue, rel=1e-9)

    def test_normal_approximation_with_ties_matches_scipy(self):
        """Test the tie-corrected normal approximation against scipy."""
        rng = np.random.default_rng(0)
        a = np.round(rng.normal(0.0, 1.0, 30), 1)
        b = np.round(rng.normal(0.4, 1.0, 25), 1)
        result = mann_whitney_u(a, b)
        reference = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
        assert result.method is UTestMethod.NORMAL_APPROX
        assert result.u == pytest.approx(reference.statistic)
        assert result.p_value == pytest.approx(reference.pvalue, rel=1e-9)

    def test_identical_samples(self):
        """Test that identical constant samples give p = 1."""
        result = mann_whitney_u([2.0] * 10, [2.0] * 12)
        assert result.p_value == 1.0

    def test_p_value_strictly_positive(self):
        """Test that extreme separations keep p > 0."""
        result = mann_whitney_u(np.arange(400.0), np.arange(400.0) + 1000.0)
        assert 0.0 < result.p_value < 1e-100

    def test_empty_sample(self):
        """Test that an empty sample is rejected."""
        with pytest.raises(ValidationError):
            mann_whitney_u([], [1.0])


class TestKde:
    """Test the kernel density estimate."""

    def test_silverman(self):
        """Test 0.9 * min(sigma, IQR / 1.34) * n^(-1/5)."""
        x = np.arange(1.0, 11.0)
        spread = (np.percentile(x, 75) - np.percentile(x, 25)) / 1.34
        expected = 0.9 * min(np.std(x, ddof=1), spread) * 10 ** (-0.2)
        assert silverman_bandwidth(x) == pytest.approx(expected)

    def test_integrates_to_one(self):
        """Test that the density on the default grid integrates to one."""
        sample = np.random.default_rng(1).normal(5.0, 2.0, 200)
        curve = kde(sample)
        assert curve.grid.size == 512
        assert np.all(curve.density >= 0)
        assert curve.integral() == pytest.approx(1.0, abs=1e-3)

    def test_explicit_grid_and_bandwidth(self):
        """Test a single-point density on a given grid."""
        curve = kde([0.0, 0.0, 1.0], grid=[0.0], bandwidth=1.0)
        expected = (2 * np.exp(0.0) + np.exp(-0.5)) / (3 * np.sqrt(2 * np.pi))
        assert curve.density[0] == pytest.approx(expected)

    @pytest.mark.parametrize("sample", [[1.0], [3.0, 3.0, 3.0]])
    def test_degenerate(self, sample):
        """Test that single points and zero-variance samples are rejected."""
        with pytest.raises(ValidationError):
            kde(sample)

    def test_histogram(self):
        """Test the equal-width histogram."""
        bins = histogram([0.1, 0.2, 0.9], bins=2, low=0.0, high=1.0)
        assert [b.count for b in bins] == [2, 1]
