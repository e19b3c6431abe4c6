import sys

import pytest

from towerdomains.domain import build_domain
from towerdomains.field import TowerDescriptor, parse_element
from towerdomains.unramified import build_tower

# smallest two-prime tower whose unit search returns a unit (pinned)
FIXTURE_PRIMES = (5, 41)
FIXTURE_UNIT = "-315 + 126*sqrt(5) - 44*sqrt(41) + 22*sqrt(205)"


def fixture_tower():
    base = TowerDescriptor(FIXTURE_PRIMES)
    return build_tower(FIXTURE_PRIMES, [parse_element(FIXTURE_UNIT, base)])


@pytest.fixture(scope="session")
def q5():
    return TowerDescriptor((5,))


@pytest.fixture(scope="session")
def phi(q5):
    return (q5.one() + q5.sqrt_m(1)) / 2


@pytest.fixture(scope="session")
def tower41():
    return fixture_tower()


@pytest.fixture(scope="session")
def domain41(tower41):
    return build_domain(tower41)


@pytest.fixture(scope="session")
def domain5(q5):
    return build_domain(build_tower((5,)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
