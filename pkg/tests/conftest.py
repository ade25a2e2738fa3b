from __future__ import annotations

import numpy as np
import pytest

from compass import MockProvider, Recommender, build_index
from compass.synthetic import synthetic_catalog

DIM = 32


@pytest.fixture(scope="session")
def small_catalog():
    return synthetic_catalog(200, dimension=DIM, seed=11)


@pytest.fixture(scope="session")
def small_index(small_catalog):
    return build_index(small_catalog)


@pytest.fixture()
def mock_provider():
    return MockProvider(seed=7, dimension=DIM)


@pytest.fixture()
def pipeline(small_index, mock_provider):
    return Recommender(small_index, mock_provider, k=50)


def unit(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    return vec / np.linalg.norm(vec)


# --- acceptance reporting -------------------------------------------------
# test_acceptance.py registers one line per criterion; they print in the
# terminal summary so a full run always ends with the checklist.

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_acceptance(name: str, passed: bool = True) -> None:
    _ACCEPTANCE_RESULTS.append((name, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[acceptance] {name}: {status}")
