import numpy as np
import pytest

from swebathy import _backend
from swebathy.forward import Bathymetry, BoundaryForcing, PhysParams
from swebathy.grid import build_grid

L, R = 1.5, 15.0

BACKENDS = ["python"] + (["compiled"] if _backend.HAVE_COMPILED else [])


def hill(x, peak=0.1, centre=4.0, width=0.25):
    return peak * np.exp(-0.5 * ((x - centre) / width) ** 2)


def wave_forcing(T, amp=0.01, depth=0.3, period=3.0):
    t = np.linspace(0.0, T, int(round(T / 0.005)) + 1)
    return BoundaryForcing.from_samples(t, depth + amp * np.minimum(t / 2.0, 1.0) * np.sin(2 * np.pi * t / period))


@pytest.fixture(scope="session")
def grid68():
    return build_grid(68, L, R)


@pytest.fixture(scope="session")
def grid32():
    return build_grid(32, L, R)


@pytest.fixture(scope="session")
def params():
    return PhysParams()


@pytest.fixture(scope="session")
def hill68(grid68):
    return Bathymetry(grid68, hill(grid68.nodes))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


# (criterion, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, status, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {crit:>2}: {status:<4} {detail}")
