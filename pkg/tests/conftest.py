import shutil
from pathlib import Path

import numpy as np
import pytest

from fxsynth.model import example_model, load_model

DATA = Path(__file__).parent / "data"


@pytest.fixture
def example():
    return example_model()


@pytest.fixture
def example_box():
    return load_model(DATA / "example_box.json")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cc():
    """Path of a host C compiler, or skip."""
    for name in ("gcc", "cc", "clang"):
        path = shutil.which(name)
        if path:
            return path
    pytest.skip("no C compiler on this host")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
