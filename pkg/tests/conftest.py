import numpy as np
import pytest
from hypothesis import settings

from radreact.worldline import ParticleProps, Worldline

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_timelike_velocity(rng, dim=4, max_speed=0.9):
    v = rng.normal(size=dim - 1)
    v *= rng.uniform(0, max_speed) / np.linalg.norm(v)
    g = 1.0 / np.sqrt(1.0 - v @ v)
    return g * np.concatenate([[1.0], v])


def massless_circle(omega=0.5, t_span=(-60.0, 60.0), n=6001, charge=1.0):
    """Null circular orbit of radius 1/omega, parametrised by lab time."""
    t = np.linspace(*t_span, n)
    c, s = np.cos(omega * t), np.sin(omega * t)
    zero = np.zeros_like(t)
    z = np.column_stack([t, c / omega, s / omega, zero])
    u = np.column_stack([np.ones_like(t), -s, c, zero])
    a = np.column_stack([zero, -omega * c, -omega * s, zero])
    return Worldline.from_arrays(t, z, u, a, ParticleProps(charge, 0.0, massless=True))


def fd_curl(potential, y, step=1e-4):
    """``d_mu A_nu - d_nu A_mu`` by fourth-order central differences."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    grad = np.empty((n, n))
    for mu in range(n):
        dy = np.zeros(n)
        dy[mu] = step
        grad[mu] = (-potential(y + 2 * dy) + 8 * potential(y + dy) - 8 * potential(y - dy) + potential(y - 2 * dy)) / (12 * step)
    return grad - grad.T


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
