import json
import time
from pathlib import Path

import pytest

from normgrid.corpus import load_corpus
from normgrid.grid import parse_grid

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def appendix_text():
    return (DATA / "appendix_matrix.txt").read_text()


@pytest.fixture(scope="session")
def appendix(appendix_text):
    return parse_grid(appendix_text, id="appendix-1")


@pytest.fixture(scope="session")
def appendix_listing():
    return (DATA / "appendix_listing.txt").read_text()


@pytest.fixture(scope="session")
def figure_replies():
    return json.loads((DATA / "figure_replies.json").read_text())


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


# ---------------------------------------------------------------- acceptance lines
# test_acceptance.py appends one line per criterion; they are printed in the
# terminal summary so they show up without -s.

SUITE_BUDGET_S = 60.0
_lines = []
_started = []


@pytest.fixture
def acceptance_log():
    return _lines


def pytest_sessionstart(session):
    _started.append(time.perf_counter())


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _started[0]
    # the budget only means something when the whole suite ran
    if session.testscollected < 100:
        return
    ok = elapsed < SUITE_BUDGET_S
    _lines.append(f"{'PASS' if ok else 'FAIL'} criterion 9: {session.testscollected} "
                  f"tests in {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")
    if not ok and exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
