import numpy as np
import pytest

from embkit.datasets import synthetic_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def blob_dataset():
    """Small well-separated dataset used by sampler and trainer tests."""
    return synthetic_dataset(classes=10, per_class=20, dim=20,
                             spread=0.1, seed=7)
