import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from isoplan.energization import parse_state
from isoplan.switching import parse_requests
from isoplan.topology import load_topology

FIXTURES = Path(__file__).parent.parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture(scope="session")
def fourtrack():
    return load_topology((FIXTURES / "fourtrack/fourtrack.net").read_text())


@pytest.fixture(scope="session")
def fourtrack_state(fourtrack):
    return parse_state((FIXTURES / "fourtrack/normal.state").read_text(), fourtrack)


@pytest.fixture(scope="session")
def bridle_request():
    reqs = parse_requests((FIXTURES / "fourtrack/bridle_removal.req").read_text())
    return reqs["bridle"]


@pytest.fixture(scope="session")
def minimal():
    return load_topology((FIXTURES / "minimal/minimal.net").read_text())


@pytest.fixture(scope="session")
def minimal_state(minimal):
    return parse_state((FIXTURES / "minimal/normal.state").read_text(), minimal)


@pytest.fixture(scope="session")
def minimal_request():
    return parse_requests((FIXTURES / "minimal/outage.req").read_text())["min1"]


@pytest.fixture(scope="session")
def minimal2():
    return load_topology((FIXTURES / "minimal2/minimal2.net").read_text())
