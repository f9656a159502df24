import numpy as np
import pytest

from manpqn.stiefel import random_stiefel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tangent(X, rng, scale=1.0):
    from manpqn.stiefel import project_tangent
    return scale * project_tangent(X, rng.standard_normal(X.shape))


@pytest.fixture
def point():
    return random_stiefel(7, 3, 0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: (int(str(k).split("-")[0]), str(k))):
        terminalreporter.write_line(mod.RESULTS[key])
