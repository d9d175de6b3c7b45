import numpy as np
import pytest

from dpm3d.geometry import GridSpec, classify_nodes
from dpm3d.potentials import Potentials


@pytest.fixture(scope="session")
def grid12():
    spec = GridSpec(0.5, 12, 0.1)
    return spec, classify_nodes(spec)


@pytest.fixture(scope="session")
def pot12(grid12):
    _, sets = grid12
    return Potentials(sets)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
