import numpy as np
import pytest

from adasise import synth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def micro_model(rng):
    return synth.random_micro_model(rng)


@pytest.fixture(scope="session")
def quality_fixture(tmp_path_factory):
    """Small planted-square dataset with the 2-block detector, on disk."""
    root = tmp_path_factory.mktemp("quality_fx")
    model = synth.planted_square_model(block_channels=(8, 64))
    return synth.write_fixture(root, n_images=4, seed=11, model=model, square=14)
