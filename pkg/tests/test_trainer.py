"""
Tests for the optimizer, schedules, early stopping and training loop.
"""

import json

import numpy as np
import pandas as pd
import pytest

from adaptive_pinn.models.network import ArchSpec
from adaptive_pinn.models.training import AdamState, Schedule, TrainConfig, TrainMode
from adaptive_pinn.services.blending import BlendingNeuron
from adaptive_pinn.services.mlp import Mlp
from adaptive_pinn.services.physics import make_problem, problem_dataset
from adaptive_pinn.services.trainer import (
    REPORT_COLUMNS,
    EarlyStopping,
    adam_step,
    predict_raw,
    schedule_lr,
    train,
    validation_metric,
    write_report,
)
from adaptive_pinn.services.transfer import freeze_mask
from adaptive_pinn.utils.validation import NumericalError, ShapeMismatchError, ValidationError


class TestSchedule:
    """Test learning-rate schedules."""

    def test_constant(self):
        """Test that the constant schedule ignores the epoch."""
        assert schedule_lr(0.34, 999, Schedule()) == 0.34

    def test_step_decay(self):
        """Test base * factor ** (epoch // every)."""
        schedule = Schedule.step_decay(0.5, 10)
        assert schedule_lr(0.34, 9, schedule) == pytest.approx(0.34)
        assert schedule_lr(0.34, 25, schedule) == pytest.approx(0.085)

    def test_negative_epoch(self):
        """Test that negative epochs are rejected."""
        with pytest.raises(ValidationError):
            schedule_lr(0.1, -1, Schedule())


class TestAdam:
    """Test the Adam update."""

    def test_first_step_moves_by_lr(self):
        """Test that the bias-corrected first step has size lr per coordinate."""
        params = np.array([1.0, -2.0, 0.5])
        grads = np.array([0.3, -4.0, 2.0])
        updated, state = adam_step(params, grads, AdamState.zeros(3), 0.01)
        np.testing.assert_allclose(updated, params - 0.01 * np.sign(grads), rtol=1e-6)
        assert state.t == 1

    def test_zero_scale_freezes(self):
        """Test that a zero multiplier leaves the parameter untouched."""
        params = np.array([1.0, 2.0])
        updated, _ = adam_step(params, np.array([1.0, 1.0]), AdamState.zeros(2), 0.1, lr_scale=np.array([0.0, 1.0]))
        assert updated[0] == 1.0
        assert updated[1] < 2.0

    def test_non_finite_gradient(self):
        """Test that a non-finite gradient is a numerical error naming the index."""
        with pytest.raises(NumericalError, match="index 1"):
            adam_step(np.zeros(2), np.array([0.0, np.nan]), AdamState.zeros(2), 0.1)

    def test_shape_mismatch(self):
        """Test that mismatched shapes are rejected."""
        with pytest.raises(ShapeMismatchError):
            adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), 0.1)


class TestEarlyStopping:
    """Test patience-based stopping."""

    def test_stops_after_patience(self):
        """Test that stopping triggers after `patience` epochs without improvement."""
        stopper = EarlyStopping(2)
        assert stopper.update(1, 1.0)
        assert not stopper.update(2, 1.5)
        assert not stopper.should_stop
        assert not stopper.update(3, 1.0)
        assert stopper.should_stop
        assert stopper.best_epoch == 1

    def test_validation_metric_falls_back_to_mse(self):
        """Test that a zero target switches the metric to MSE."""
        value, metric = validation_metric([0.0, 2.0], [1.0, 2.0])
        assert metric == "mse"
        assert value == pytest.approx(0.5)
        value, metric = validation_metric([1.0, 2.0], [1.1, 2.0])
        assert metric == "mape"
        assert value == pytest.approx(0.05)


class TestTrain:
    """Test the training loop."""

    @pytest.fixture
    def cfg(self):
        return TrainConfig(learning_rate=0.05, max_epochs=1500, early_stop_patience=1500,
                           schedule=Schedule.step_decay(0.5, 250), seed=3)

    def test_fits_linear_target(self, linear_ds, cfg):
        """Test that a linear model recovers a linear target."""
        net = Mlp.init(ArchSpec.parse("2-[]-1"), 0)
        trained, neuron, report = train(net, None, linear_ds, None, cfg)

        assert neuron is None
        assert report.best_val_mape < 0.02
        assert report.n_epochs == 1500
        assert 1 <= report.best_epoch <= report.n_epochs
        predictions = predict_raw(trained, report, linear_ds.features)
        assert np.mean(np.abs(predictions - linear_ds.targets) / linear_ds.targets) < 0.02

    def test_deterministic(self, linear_ds):
        """Test that the same seed reproduces the same parameters."""
        cfg = TrainConfig(learning_rate=0.01, max_epochs=30, seed=11)
        net = Mlp.init(ArchSpec.parse("2-[3]-1"), 1)
        a, _, _ = train(net, None, linear_ds, None, cfg)
        b, _, _ = train(net, None, linear_ds, None, cfg)
        np.testing.assert_array_equal(a.params, b.params)

    def test_early_stopping(self, linear_ds):
        """Test that training ends patience epochs after the best epoch."""
        cfg = TrainConfig(learning_rate=0.5, max_epochs=400, early_stop_patience=5, seed=2)
        _, _, report = train(Mlp.init(ArchSpec.parse("2-[4]-1"), 0), None, linear_ds, None, cfg)
        if report.stopped_early:
            assert report.n_epochs == report.best_epoch + 5

    def test_mode_checks(self, linear_ds):
        """Test that PINN mode needs a neuron and a problem, and data-only mode takes neither."""
        net = Mlp.init(ArchSpec.parse("2-[3]-1"), 0)
        with pytest.raises(ValidationError):
            train(net, None, linear_ds, None, TrainConfig(mode=TrainMode.PINN, max_epochs=2))
        with pytest.raises(ValidationError):
            train(net, BlendingNeuron(), linear_ds, None, TrainConfig(max_epochs=2))

    def test_feature_mismatch(self, linear_ds):
        """Test that the dataset width must match the network."""
        with pytest.raises(ShapeMismatchError):
            train(Mlp.init(ArchSpec.parse("3-[3]-1"), 0), None, linear_ds, None, TrainConfig(max_epochs=2))

    def test_frozen_parameters_stay_fixed(self, linear_ds):
        """Test that a zero learning-rate multiplier keeps a layer's parameters."""
        net = Mlp.init(ArchSpec.parse("2-[4]-1"), 0)
        mask = freeze_mask(net, [0])
        trained, _, _ = train(net, None, linear_ds, None, TrainConfig(learning_rate=0.05, max_epochs=40), lr_scale=mask)
        layer0 = net.layer_slices()[0]
        np.testing.assert_array_equal(trained.params[layer0], net.params[layer0])


class TestPinnTraining:
    """Test adaptive PINN training."""

    @pytest.fixture
    def setup(self):
        prob = make_problem("conduction1d", 16, 0)
        ds = problem_dataset(prob, 20, seed=1)
        net = Mlp.init(ArchSpec.parse("1-[8]-1"), 2)
        cfg = TrainConfig(learning_rate=0.01, max_epochs=60, early_stop_patience=60,
                          mode=TrainMode.PINN, seed=4)
        return prob, ds, net, cfg

    def test_lambda_trace(self, setup):
        """Test that every epoch records lambda_p in [0, 1] and a non-negative physics loss."""
        prob, ds, net, cfg = setup
        _, neuron, report = train(net, BlendingNeuron(0.0), ds, prob, cfg)

        assert neuron is not None
        assert report.alpha_final == neuron.alpha
        assert len(report.lambda_p_trace) == report.n_epochs
        assert all(0.0 <= v <= 1.0 for v in report.lambda_p_trace)
        assert all(r.physics_loss >= 0.0 for r in report.epochs)
        assert report.epochs[0].lambda_p == pytest.approx(0.5)

    def test_fixed_alpha(self, setup):
        """Test that the blending scalar stays put when it is not trained."""
        prob, ds, net, cfg = setup
        _, neuron, report = train(net, BlendingNeuron(0.0), ds, prob, cfg, train_alpha=False)
        assert neuron.alpha == 0.0
        assert set(report.lambda_p_trace) == {0.5}

    def test_alternating_epochs(self, setup):
        """Test that alternating data and physics epochs still trains."""
        prob, ds, net, cfg = setup
        _, _, report = train(net, BlendingNeuron(0.0), ds, prob, cfg.model_copy(update={"alternate": True}))
        assert report.n_epochs >= 1
        assert np.isfinite(report.best_val_mape)


class TestWriteReport:
    """Test report files."""

    def test_files(self, tmp_path, linear_ds):
        """Test the per-epoch CSV and the JSON summary."""
        _, _, report = train(Mlp.init(ArchSpec.parse("2-[3]-1"), 0), None, linear_ds, None,
                             TrainConfig(max_epochs=5))
        csv_path, json_path = write_report(report, tmp_path, "train")

        frame = pd.read_csv(csv_path)
        assert list(frame.columns) == REPORT_COLUMNS
        assert len(frame) == report.n_epochs
        summary = json.loads(json_path.read_text())
        assert "wall_time" not in summary
        assert summary["n_epochs"] == 5
