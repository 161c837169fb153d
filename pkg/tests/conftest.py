import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

PROPERTY_CASES = 200

settings.register_profile(
    "artifact",
    max_examples=PROPERTY_CASES,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    derandomize=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "artifact"))

ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "property: hypothesis invariant suite")
    config.addinivalue_line("markers", "slow: end-to-end experiment")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_spd(rng, n, cond=100.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), size=n))
    A = (Q * eig) @ Q.T
    return (A + A.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
