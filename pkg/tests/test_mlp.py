"""
Tests for the feed-forward network and its checkpoints.
"""

import json

import numpy as np
import pytest

from adaptive_pinn.models.network import Activation, ArchSpec, ParamLayout
from adaptive_pinn.services import mlp as mlp_io
from adaptive_pinn.services.mlp import Mlp, param_hash
from adaptive_pinn.utils.validation import DataError, ShapeMismatchError, ValidationError


@pytest.fixture
def net():
    """Small tanh network with non-zero biases."""
    arch = ArchSpec.parse("2-[4,3]-1")
    base = Mlp.init(arch, 5)
    rng = np.random.default_rng(1)
    return base.with_params(base.params + 0.1 * rng.normal(size=base.params.size))


class TestArchSpec:
    """Test architecture parsing."""

    def test_parse_and_count(self):
        """Test parameter count of the reference architecture."""
        arch = ArchSpec.parse("3-[20,20,12]-1")
        assert arch.hidden == [20, 20, 12]
        assert arch.n_layers == 4
        assert arch.n_params == 765
        assert arch.to_string() == "3-[20,20,12]-1"

    def test_linear_model(self):
        """Test that an empty hidden list is a linear model."""
        arch = ArchSpec.parse("3-[]-1")
        assert arch.n_layers == 1
        assert arch.n_params == 4

    @pytest.mark.parametrize("text", ["3-20-1", "a-[2]-1", "3-[0]-1", ""])
    def test_invalid(self, text):
        """Test that malformed architectures are usage errors."""
        with pytest.raises(ValidationError):
            ArchSpec.parse(text)

    def test_layout_roundtrip(self):
        """Test that flatten inverts unflatten."""
        arch = ArchSpec.parse("2-[3]-1")
        layout = ParamLayout(arch)
        theta = np.arange(arch.n_params, dtype=float)
        np.testing.assert_array_equal(layout.flatten(layout.unflatten(theta)), theta)
        assert layout.layer_slice(1) == slice(9, 13)


class TestForward:
    """Test forward passes."""

    def test_init_is_deterministic(self):
        """Test that the same seed gives the same parameters with zero biases."""
        arch = ArchSpec.parse("2-[4]-1")
        a, b = Mlp.init(arch, 3), Mlp.init(arch, 3)
        np.testing.assert_array_equal(a.params, b.params)
        blocks = ParamLayout(arch).unflatten(a.params)
        assert np.all(blocks[1] == 0) and np.all(blocks[3] == 0)

    def test_matches_manual_computation(self, net):
        """Test the forward pass against an explicit numpy evaluation."""
        w0, b0, w1, b1, w2, b2 = ParamLayout(net.arch).unflatten(net.params)
        x = np.array([[0.3, -0.7], [1.1, 0.2]])
        expected = (np.tanh(np.tanh(x @ w0 + b0) @ w1 + b1) @ w2 + b2)[:, 0]
        np.testing.assert_allclose(net.forward_batch(x), expected, rtol=1e-12)

    def test_sigmoid_activation(self):
        """Test the sigmoid hidden activation."""
        arch = ArchSpec.parse("1-[2]-1", Activation.SIGMOID)
        net = Mlp.init(arch, 0)
        w0, b0, w1, b1 = ParamLayout(arch).unflatten(net.params)
        expected = (1.0 / (1.0 + np.exp(-(0.5 * w0 + b0))) @ w1 + b1)[0, 0]
        assert net.forward([0.5]) == pytest.approx(expected)

    def test_wrong_input_width(self, net):
        """Test that inputs of the wrong width are rejected."""
        with pytest.raises(ShapeMismatchError):
            net.forward([1.0, 2.0, 3.0])
        with pytest.raises(ShapeMismatchError):
            net.forward_batch(np.ones((2, 3)))

    def test_wrong_parameter_count(self):
        """Test that a parameter vector of the wrong size is rejected."""
        with pytest.raises(ShapeMismatchError):
            Mlp(ArchSpec.parse("2-[4]-1"), np.zeros(3))


class TestInputDerivatives:
    """Test input derivatives of the network."""

    def test_value_channel_identical_to_forward(self, net):
        """Test that the value channel equals the plain forward pass exactly."""
        x = [0.4, -0.9]
        u, _, _ = net.forward_with_input_derivs(x, 0)
        assert u == net.forward(x)

    @pytest.mark.parametrize("dim", [0, 1])
    def test_against_finite_differences(self, net, dim):
        """Test first and second input derivatives by central differences."""
        x = np.array([0.4, -0.9])
        h = 1e-4
        step = np.zeros(2)
        step[dim] = h
        f0, fp, fm = net.forward(x), net.forward(x + step), net.forward(x - step)

        _, du, d2u = net.forward_with_input_derivs(x, dim)

        assert du == pytest.approx((fp - fm) / (2 * h), rel=1e-6, abs=1e-8)
        assert d2u == pytest.approx((fp - 2 * f0 + fm) / (h * h), rel=1e-4, abs=1e-5)

    def test_batch_matches_single(self, net):
        """Test that batched derivatives agree with single-point ones."""
        x = np.array([[0.1, 0.2], [-0.5, 0.8], [1.0, -1.0]])
        u, du, d2u = net.input_derivs_batch(x, 1)
        for i in range(3):
            single = net.forward_with_input_derivs(x[i], 1)
            assert (u[i], du[i], d2u[i]) == pytest.approx(single)

    def test_dimension_out_of_range(self, net):
        """Test that an invalid derivative dimension is rejected."""
        with pytest.raises(ShapeMismatchError):
            net.forward_with_input_derivs([0.0, 0.0], 2)


class TestCheckpoint:
    """Test JSON checkpoints."""

    def test_save_and_load(self, tmp_path, net):
        """Test that a checkpoint restores identical parameters."""
        path = mlp_io.save(net, tmp_path / "model.json")
        loaded = mlp_io.load(path, expected_arch=net.arch)
        np.testing.assert_array_equal(loaded.params, net.params)
        assert param_hash(loaded) == param_hash(net)

    def test_missing(self, tmp_path):
        """Test that a missing checkpoint is a data error."""
        with pytest.raises(DataError):
            mlp_io.load(tmp_path / "absent.json")

    def test_count_mismatch(self, tmp_path, net):
        """Test that a truncated parameter list is rejected."""
        payload = net.to_dict()
        payload["params"] = payload["params"][:-1]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError, match="parameter count mismatch"):
            mlp_io.load(path)

    def test_unsupported_version(self, tmp_path, net):
        """Test that an unknown checkpoint version is rejected."""
        payload = net.to_dict()
        payload["version"] = 99
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(DataError, match="version"):
            mlp_io.load(path)

    def test_expected_arch_mismatch(self, tmp_path, net):
        """Test that loading into a different architecture is a shape error."""
        path = mlp_io.save(net, tmp_path / "model.json")
        with pytest.raises(ShapeMismatchError):
            mlp_io.load(path, expected_arch=ArchSpec.parse("2-[5,3]-1"))

    def test_layer_hash_isolated(self, net):
        """Test that a per-layer hash only changes with that layer."""
        changed = net.params.copy()
        changed[net.layer_slices()[2]] += 1.0
        other = net.with_params(changed)
        assert param_hash(other, [0, 1]) == param_hash(net, [0, 1])
        assert param_hash(other, [2]) != param_hash(net, [2])
