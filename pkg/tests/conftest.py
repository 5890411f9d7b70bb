import numpy as np
import pytest

from relaylab.channel import AntennaConfig, ChannelRealization, PowerConstraints, Topology, realization

LN2 = np.log(2.0)


def random_channel(m1=2, n1=2, m2=2, n2=2, seed=0, topo=Topology()):
    return realization(AntennaConfig(m1, n1, m2, n2), topo, seed, 0)


def random_unitary(n, rng):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_psd(n, rng, rank=None):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return a @ a.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_power():
    return PowerConstraints(1.0, 1.0)


def scalar_channel(h11, h21, h12):
    return ChannelRealization.scalar(h11, h21, h12)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
