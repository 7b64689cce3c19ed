import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def paper():
    from optosim.model import paper_preset

    return paper_preset()


@pytest.fixture(scope="session")
def paper_scaled(paper):
    return paper.scaled()


@pytest.fixture(scope="session")
def square():
    from optosim.model import PulseEnvelope

    return PulseEnvelope()


def run_python(code, threads=None, env_extra=None, timeout=600):
    """Run ``code`` in a fresh interpreter; returns stdout."""
    env = dict(os.environ)
    if threads is not None:
        env["NUMBA_NUM_THREADS"] = str(threads)
    env.update(env_extra or {})
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, timeout=timeout)
    if out.returncode:
        raise AssertionError(out.stderr)
    return out.stdout


def within_se(value, target, se, k):
    return abs(value - target) <= k * se + 1e-12


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
