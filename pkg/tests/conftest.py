import numpy as np
import pytest


def make_rng(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng():
    return make_rng(12345)
