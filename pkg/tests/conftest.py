import numpy as np
import pytest

from measim.cq import Ensemble, Povm

KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])
PLUS = np.array([1.0, 1.0]) / np.sqrt(2)
MINUS = np.array([1.0, -1.0]) / np.sqrt(2)


def proj(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def bb84_elements():
    return [proj(v) / 2 for v in (KET0, KET1, PLUS, MINUS)]


@pytest.fixture
def bb84():
    return Povm(bb84_elements(), ("0", "1", "+", "-"))


@pytest.fixture
def conjugate_ensemble():
    return Ensemble(np.full(4, 0.25), tuple(proj(v) for v in (KET0, KET1, PLUS, MINUS)))


@pytest.fixture
def bell_ab():
    v = np.zeros(4)
    v[0] = v[3] = 1 / np.sqrt(2)
    return proj(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
