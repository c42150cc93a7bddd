import numpy as np
import pytest
from scipy.special import wofz

from vpspec.equilibria import compact_polynomial, gaussian, survival_threshold

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def compact():
    return compact_polynomial()


@pytest.fixture(scope="session")
def maxwellian():
    return gaussian()


@pytest.fixture(scope="session")
def kappa0(compact):
    return survival_threshold(compact)


def maxwellian_H(z):
    """Closed form for the unit Maxwellian through the Faddeeva function."""
    zeta = np.asarray(z, dtype=complex) / np.sqrt(2)
    return -(1 + zeta * 1j * np.sqrt(np.pi) * wofz(zeta))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
