"""
Shared fixtures.
"""

import numpy as np
import pytest

from adaptive_pinn.config import settings
from adaptive_pinn.models.dataset import Dataset, SynthDomain, SynthSpec
from adaptive_pinn.services.data_service import synthesize


@pytest.fixture(autouse=True)
def no_log_file(monkeypatch):
    """Keep test runs from writing the rotating log file."""
    monkeypatch.setattr(settings, "LOG_FILE", None)


@pytest.fixture
def water():
    """Small noise-free water analog."""
    return synthesize(SynthSpec.default(SynthDomain.WATER, 40, 0.0, 1))


@pytest.fixture
def sodium():
    """Small noisy sodium analog."""
    return synthesize(SynthSpec.default(SynthDomain.SODIUM, 30, 0.02, 2))


@pytest.fixture
def linear_ds():
    """y = 2 + x0 - 0.5 x1 on a small grid, positive targets."""
    rng = np.random.default_rng(7)
    x = rng.uniform(-1.0, 1.0, size=(24, 2))
    y = 2.0 + x[:, 0] - 0.5 * x[:, 1]
    return Dataset(features=x, targets=y, column_names=["x0", "x1"], target_name="y")
