import numpy as np
import pytest

from axiswirl.grid import make_grid


def gauss(r, z):
    return np.exp(-r * r - z * z)


@pytest.fixture
def small_grid():
    return make_grid(4.0, 4.0, 32, 64)


def rel_l2(a, b, w):
    return float(np.sqrt(np.sum((a - b) ** 2 * w) / np.sum(b * b * w)))


# ---------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion, repeated in the summary

_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
