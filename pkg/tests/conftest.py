"""py.test configuration."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path for tests
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from sgru_forecast.data import SplitPlan, make_synthetic, standardize, window  # noqa: E402
from sgru_forecast.model import build_model  # noqa: E402
from sgru_forecast.trainer import TrainConfig  # noqa: E402


@pytest.fixture
def tiny_config():
    """Smallest useful model: z=2, h=3, g=3 with one-layer heads."""
    return TrainConfig(
        latent_dim=2,
        hidden_dim=3,
        g_dim=3,
        prior_mlp=(1, 4),
        emission_mlp=(1, 4),
        epochs=3,
        patience=0,
    )


@pytest.fixture
def tiny_model(tiny_config):
    return build_model(2, tiny_config, np.random.default_rng(0))


@pytest.fixture
def small_plan():
    return SplitPlan(n_train=40, n_val=10, n_cond=5, seq_len=10, n_pred=8)


@pytest.fixture
def small_windows(small_plan):
    """Standardised synthetic series windowed into 4 training subsequences."""
    ds = make_synthetic(80, seed=1)
    scaled, _ = standardize(ds, small_plan.train_span)
    return window(scaled, small_plan)
