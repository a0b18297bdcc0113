import numpy as np
import pytest

from mimo_isac.metrics import CovarianceSet
from mimo_isac.scenario import ArrayGeometry, Scenario, SignalConfig, TargetSet, UserSet


def random_cov(rng, n_blocks, n, power=1.0):
    g = rng.standard_normal((n_blocks, n, n)) + 1j * rng.standard_normal((n_blocks, n, n))
    blocks = g @ np.swapaxes(g, -1, -2).conj()
    return CovarianceSet(blocks * power / np.trace(blocks.sum(0)).real)


def tiny_scenario():
    """N_t = 2, C = 1, K = 1, M = 1 with the values used by the worked examples."""
    geom = ArrayGeometry(2, 2)
    h = np.array([[1.0, np.exp(1j * np.pi / 3)]])
    return Scenario(geom, UserSet(h, [1.0]), TargetSet([30.0], [1.0]), SignalConfig(8, 1.0, 1, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# filled by the acceptance tests, printed once at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
