import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from varib.dataset import dataset_from_pairs


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {name}: {report.outcome.upper()}", flush=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_paired_data(rng, dx=4, dy=3, n=200, noise=0.5):
    """Well-conditioned random linear-gaussian paired data."""
    mix = rng.standard_normal((dx, dx))
    X = rng.standard_normal((n, dx)) @ mix
    B = rng.standard_normal((dx, dy))
    Y = X @ B + noise * rng.standard_normal((n, dy))
    return dataset_from_pairs(X, Y)
