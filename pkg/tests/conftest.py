import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tracemap.geometry import DomainSpec, make_boundary_grid


@pytest.fixture(scope="session")
def square():
    return DomainSpec.unit_square()


@pytest.fixture(scope="session")
def square_grid(square):
    return make_boundary_grid(square, 400)


@pytest.fixture(scope="session")
def circle_grid():
    return make_boundary_grid(DomainSpec.polar(1.0), 400)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_RESULTS: dict[str, str] = {}
ACCEPTANCE_INFO: list[str] = []


def record_info(line: str) -> None:
    """Measured numbers worth echoing in the terminal summary."""
    ACCEPTANCE_INFO.append(line)


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "acceptance" in report.keywords:
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{_ACCEPTANCE_RESULTS[name]}  {name}")
    for line in ACCEPTANCE_INFO:
        terminalreporter.write_line(f"  {line}")
