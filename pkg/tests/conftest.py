import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from efslstm.synthetic import planted_ar2, sine_series, write_csv  # noqa: E402


@pytest.fixture(scope="session")
def sine_csv(tmp_path_factory) -> Path:
    return write_csv(sine_series(600, seed=42), tmp_path_factory.mktemp("data") / "sine.csv")


@pytest.fixture(scope="session")
def small_sine_csv(tmp_path_factory) -> Path:
    return write_csv(sine_series(120, seed=1), tmp_path_factory.mktemp("data") / "sine_small.csv")


@pytest.fixture(scope="session")
def planted_csv(tmp_path_factory) -> Path:
    return write_csv(planted_ar2(300, seed=0), tmp_path_factory.mktemp("data") / "planted.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[n])
