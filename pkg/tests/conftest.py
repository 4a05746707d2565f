from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_points(rng, m, n):
    return rng.integers(0, 2, size=(m, n), dtype=np.uint8)
