from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def toy3_dir():
    return FIXTURES / "toy3"


@pytest.fixture
def toy6_dir():
    return FIXTURES / "toy6"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
