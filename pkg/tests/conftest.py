import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dellsys.elliptic import Modulus
from dellsys.intertwiner import Positions, lattice_separation
from dellsys.lax import ModelParams, PhaseState

settings.register_profile(
    "dellsys",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("dellsys")


def random_positions(rng, N, spread=0.3, min_gap=0.05):
    """Seeded complex coordinates, well separated on the torus of tau = 0.8i."""
    while True:
        q = spread * rng.standard_normal(N) + 0.05j * rng.standard_normal(N)
        if lattice_separation(q, 0.8j) > min_gap:
            return Positions(q)


def random_z(rng):
    return complex(rng.uniform(0.1, 0.4), rng.uniform(0.05, 0.3))


def random_state(rng, N):
    return PhaseState(random_positions(rng, N), 0.3 * rng.standard_normal(N))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def mod():
    return Modulus(0.8j)


@pytest.fixture
def params():
    return ModelParams()


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
