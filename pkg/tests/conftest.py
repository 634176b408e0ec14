import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the shared oracles module

from qcilink import build_peg_code, qam_context, qci_context


@pytest.fixture(scope="session")
def toy_code():
    return build_peg_code(48, 24, 3, seed=0)


@pytest.fixture(scope="session")
def qam16_ctx():
    return qam_context(16)


@pytest.fixture(scope="session")
def qci16_ctx():
    return qci_context(16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
