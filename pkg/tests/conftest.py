import numpy as np
import pytest

from edgevault.crypto import TimestampAuthority
from edgevault.curves import tiny_curve
from edgevault.ledger import IdentityLedger
from edgevault.securezone import SecureZone


class TickClock:
    """Deterministic logical clock for tests."""

    def __init__(self):
        self.now = 0

    def __call__(self):
        return self.now

    def advance(self, dt: int = 1):
        self.now += dt


@pytest.fixture
def clock():
    return TickClock()


@pytest.fixture
def tsa(clock):
    return TimestampAuthority(issuer="test-tsa", clock=clock)


@pytest.fixture
def zone(tsa):
    return SecureZone(zone_seed=42, tsa=tsa)


@pytest.fixture
def f5_ledger():
    return IdentityLedger(group_id="test-group", curve=tiny_curve())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
