import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from raftcensus import TrainConfig, default_platform_training_set, init_model, train
from raftcensus.datasets import default_water_training_set

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def platform_model():
    """Platform net trained once on the default synthetic set."""
    data = default_platform_training_set(seed=1234)
    cfg = TrainConfig(seed=1234)
    model, _ = train(init_model((10, 2, 1), seed=1234), data.features, data.labels, cfg)
    return model


@pytest.fixture(scope="session")
def water_model():
    """Three-class water net; smaller set than the CLI default, same recipe."""
    data = default_water_training_set(seed=55, n_per_class=1500)
    cfg = TrainConfig(max_epochs=1500, seed=55)
    model, _ = train(init_model((10, 8, 3), seed=55), data.features, data.labels, cfg)
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
