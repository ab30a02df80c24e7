import sys
from pathlib import Path

import numpy as np
import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

CASSETTES = TESTS / "fixtures" / "cassettes"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cassettes():
    return CASSETTES
