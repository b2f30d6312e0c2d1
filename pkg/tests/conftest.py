import random

import pytest
from hypothesis import HealthCheck, settings

from etlc.crypto import SECP256K1, TINY, TOY64, CryptoSuite, DEFAULT_SUITE

settings.register_profile("etlc", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("etlc")

SUITES = {
    "secp256k1": DEFAULT_SUITE,
    "toy64": CryptoSuite(TOY64),
}


@pytest.fixture(params=sorted(SUITES))
def suite(request):
    """Every suite with enough group order for collision-free hashing to scalars."""
    return SUITES[request.param]


@pytest.fixture
def tiny_suite():
    return CryptoSuite(TINY)


@pytest.fixture
def rng():
    return random.Random(20240601)


@pytest.fixture(scope="session")
def corpus():
    """The full strategy product against the bundled honest scenario."""
    from etlc.harness import sweep
    return sweep("honest")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
