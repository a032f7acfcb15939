import numpy as np
import pytest
from hypothesis import settings

from bbinit.synthetic import write_square_dataset

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square_dataset(tmp_path):
    """Two sequences of red squares on blue: 3 frames and 2 frames."""
    return write_square_dataset(tmp_path / "ds", noise=3.0)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(name, ok, detail):
        status = "WAIVED" if ok is None else "PASS" if ok else "FAIL"
        line = f"{status:<6} {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
