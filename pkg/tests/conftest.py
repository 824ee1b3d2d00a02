import numpy as np
import pytest

from satnoma.noma import SicMode, reference_scenario


def db(x):
    return 10.0 ** (x / 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20201016)


@pytest.fixture(scope="session")
def fhs_psic():
    return reference_scenario("fhs")


@pytest.fixture(scope="session")
def fhs_ipsic():
    return reference_scenario("fhs", sic=SicMode.ipsic_db(-30.0))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
