"""
Tests for dataset loading, synthesis, normalization and splitting.
"""

import numpy as np
import pytest

from adaptive_pinn.models.dataset import Dataset, SynthDomain, SynthSpec
from adaptive_pinn.services.data_service import (
    apply_norm,
    denormalize,
    load_csv,
    normalize,
    save_csv,
    sodium_nusselt,
    split,
    split_indices,
    standardize_targets,
    subset,
    synthesize,
    water_nusselt,
)
from adaptive_pinn.utils.validation import DataError, ValidationError


class TestLoadCsv:
    """Test CSV loading."""

    def test_units_in_header(self, tmp_path):
        """Test that bracketed units are split from column names."""
        path = tmp_path / "data.csv"
        path.write_text("re[-],pr,nu\n1000,0.7,10\n2000,0.8,20\n")

        ds = load_csv(path)

        assert ds.column_names == ["re", "pr"]
        assert ds.units == ["-", "-"]
        assert ds.target_name == "nu"
        assert ds.n_samples == 2
        assert ds.n_features == 2

    def test_named_target_column_moved_last(self, tmp_path):
        """Test that a named target column is used wherever it sits."""
        path = tmp_path / "data.csv"
        path.write_text("nu,re,pr\n10,1000,0.7\n20,2000,0.8\n")

        ds = load_csv(path, "nu")

        assert ds.column_names == ["re", "pr"]
        np.testing.assert_allclose(ds.targets, [10.0, 20.0])

    def test_missing_file(self, tmp_path):
        """Test that a missing file is a data error."""
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "absent.csv")

    def test_non_numeric_cell_reports_location(self, tmp_path):
        """Test that a non-numeric cell names its row and column."""
        path = tmp_path / "data.csv"
        path.write_text("re,nu\n1000,10\nabc,20\n")

        with pytest.raises(DataError, match="row 2"):
            load_csv(path)

    def test_single_column_rejected(self, tmp_path):
        """Test that a file without features is rejected."""
        path = tmp_path / "data.csv"
        path.write_text("nu\n10\n")

        with pytest.raises(DataError):
            load_csv(path)

    def test_non_positive_nusselt_rejected(self, tmp_path):
        """Test that non-positive Nusselt targets are rejected."""
        path = tmp_path / "data.csv"
        path.write_text("re,nu\n1000,10\n2000,0\n")

        with pytest.raises(DataError):
            load_csv(path)

    def test_save_then_load_preserves_values(self, tmp_path, water):
        """Test that saved data reloads with identical values."""
        path = save_csv(water, tmp_path / "water.csv")

        loaded = load_csv(path)

        np.testing.assert_array_equal(loaded.features, water.features)
        np.testing.assert_array_equal(loaded.targets, water.targets)


class TestSynthesize:
    """Test correlation-based synthesis."""

    def test_noise_free_targets_match_correlation(self, water):
        """Test that noise-free water targets follow Dittus-Boelter."""
        expected = water_nusselt(water.features[:, 0], water.features[:, 1])
        np.testing.assert_allclose(water.targets, expected)
        np.testing.assert_allclose(water.clean_targets, expected)

    def test_sodium_clean_targets(self, sodium):
        """Test that the sodium analog keeps the noise-free values."""
        np.testing.assert_allclose(sodium.clean_targets, sodium_nusselt(sodium.features[:, 0]))
        assert not np.allclose(sodium.targets, sodium.clean_targets)
        assert np.all(sodium.targets > 0)

    def test_heavy_noise_floor(self):
        """Test that heavy noise is floored at 1e-6 of the clean target."""
        ds = synthesize(SynthSpec.default(SynthDomain.SODIUM, 400, 0.9, 5))
        floor = 1e-6 * ds.clean_targets
        assert np.all(ds.targets >= floor)
        assert np.any(ds.targets == floor)

    def test_default_sizes(self):
        """Test the default point counts of both domains."""
        assert SynthSpec.default(SynthDomain.WATER).n_points == 400
        assert SynthSpec.default(SynthDomain.SODIUM).n_points == 87

    def test_same_seed_same_data(self):
        """Test that synthesis is deterministic for a seed."""
        spec = SynthSpec.default(SynthDomain.SODIUM, 20, 0.05, 11)
        a, b = synthesize(spec), synthesize(spec)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.targets, b.targets)

    def test_features_in_range(self, sodium):
        """Test that sampled features stay inside their ranges."""
        spec = SynthSpec.default(SynthDomain.SODIUM)
        for j, feature in enumerate(spec.ranges):
            assert np.all(sodium.features[:, j] >= feature.low)
            assert np.all(sodium.features[:, j] <= feature.high)


class TestNormalize:
    """Test feature standardization."""

    def test_zero_mean_unit_std(self, water):
        """Test that normalized columns have mean 0 and population std 1."""
        normalized, stats = normalize(water)

        np.testing.assert_allclose(normalized.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(normalized.features.std(axis=0), 1.0, atol=1e-12)
        np.testing.assert_array_equal(normalized.targets, water.targets)
        assert normalized.norm == stats

    def test_denormalize_restores_features(self, water):
        """Test that denormalization inverts normalization."""
        normalized, _ = normalize(water)
        np.testing.assert_allclose(denormalize(normalized).features, water.features)

    def test_double_normalization_rejected(self, water):
        """Test that an already normalized dataset is not normalized again."""
        normalized, stats = normalize(water)
        with pytest.raises(ValidationError):
            apply_norm(normalized, stats)

    def test_constant_column_rejected(self):
        """Test that a constant column cannot be standardized."""
        ds = Dataset(features=[[1.0, 2.0], [1.0, 3.0]], targets=[1.0, 2.0], column_names=["a", "b"])
        with pytest.raises(ValidationError, match="constant column 'a'"):
            normalize(ds)

    def test_standardized_targets_invert(self, sodium):
        """Test that raw targets are recovered after target standardization."""
        standardized, _ = standardize_targets(sodium)
        np.testing.assert_allclose(standardized.raw_targets(), sodium.targets)


class TestSplit:
    """Test random splitting."""

    def test_sizes_round_half_up(self):
        """Test the first part size floor(f * n + 0.5)."""
        first, rest = split_indices(87, 0.2, 0)
        assert len(first) == 17
        assert len(rest) == 70

        first, rest = split_indices(10, 0.25, 0)
        assert len(first) == 3

    def test_disjoint_and_exhaustive(self):
        """Test that the two parts partition the index range."""
        first, rest = split_indices(50, 0.3, 4)
        assert set(first).isdisjoint(rest)
        assert sorted(np.concatenate([first, rest]).tolist()) == list(range(50))

    def test_empty_part_rejected(self):
        """Test that a fraction leaving a part empty is rejected."""
        with pytest.raises(ValidationError):
            split_indices(3, 0.1, 0)
        with pytest.raises(ValidationError, match=r"Split fraction must lie in \(0, 1\), got 1.0"):
            split_indices(10, 1.0, 0)

    def test_split_keeps_clean_targets(self, sodium):
        """Test that subsets carry the matching noise-free targets."""
        holdout, train = split(sodium, 0.2, 3)
        assert holdout.n_samples == 17
        assert holdout.n_samples + train.n_samples == sodium.n_samples
        assert holdout.clean_targets.shape == holdout.targets.shape

    def test_empty_subset_rejected(self, sodium):
        """Test that an empty subset is rejected."""
        with pytest.raises(ValidationError):
            subset(sodium, [])
