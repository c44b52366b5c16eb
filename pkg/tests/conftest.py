import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)
os.environ.setdefault("CFPL_QUIET", "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_rho(rng):
    """Long-term CSI of one M=3, K=2 drop."""
    from core.netenv import GeometryConfig, sample_deployment

    return sample_deployment(GeometryConfig(), 3, 2, rng)


@pytest.fixture(autouse=True)
def _no_log_files():
    from utils.logger import LOG_TYPES, set_log_channel

    yield
    for log_type in LOG_TYPES:
        set_log_channel(log_type, None)
