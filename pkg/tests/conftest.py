import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from magnls.asymptotics import sweep  # noqa: E402
from magnls.config import load_config  # noqa: E402
from magnls.limit2d import ground_energy_unit  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def example_cfg():
    return load_config()


@pytest.fixture(scope="session")
def e01():
    return ground_energy_unit(4.0)


@pytest.fixture(scope="session")
def example_sweep(example_cfg):
    """Full sweep on the bundled example (256 x 256, eps 0.4, 0.2, 0.1)."""
    cfg = example_cfg
    return sweep(cfg.context(cfg.eps_list[0]), cfg.eps_list, cfg.solver, keep_fields=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
