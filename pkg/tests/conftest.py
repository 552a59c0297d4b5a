import numpy as np
import pytest

from wavefanova.dwt import WaveletCoefficients, dyadic_level, forward_dwt, inverse_dwt


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def transform_matrix(n, basis, j0=0):
    """Dense analysis matrix built column by column from unit impulses."""
    cols = [forward_dwt(np.eye(n)[i], basis, j0).to_array() for i in range(n)]
    return np.array(cols).T


def unit_coefficient(n, j0, j, k):
    J = dyadic_level(n)
    details = [np.zeros(2 ** lev) for lev in range(j0, J)]
    details[j - j0][k] = 1.0
    return WaveletCoefficients(j0=j0, J=J, scaling=np.zeros(2 ** j0), details=details)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion and return the flag."""
    def _report(cid, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {cid}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
