import socket

import pytest

from formcast.grid import GridSpec
from formcast.model import TrainingSession, train_stream
from formcast.simulator import builtin_plays, generate
from formcast.vision import make_package


@pytest.fixture
def spec():
    return GridSpec()


@pytest.fixture(scope="session")
def plays():
    return builtin_plays()


def play_packages(play, draw=0, start_seq=0):
    return [make_package(start_seq + k, 2.0 * (start_seq + k), f, draw=draw) for k, f in enumerate(play.formations)]


def train_on_play(play, spec=None):
    session = TrainingSession(spec or GridSpec())
    return train_stream(session, play_packages(play), episodic=True)


@pytest.fixture(scope="session")
def trained_table():
    """Table from 15000 simulated packages, seed 7."""
    spec = GridSpec()
    packages = (pkg for _, pkg in generate(7, 15000, spec=spec))
    return train_stream(TrainingSession(spec), packages, limit=15000)


@pytest.fixture
def free_port():
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
