import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cloudcalc import load_policy, load_program, program_path  # noqa: E402

PROGRAMS = Path(str(program_path("db.cld"))).parent


@pytest.fixture
def programs_dir():
    return PROGRAMS


@pytest.fixture
def phi_db():
    return load_policy(PROGRAMS / "phiDB.pol")


@pytest.fixture
def phi_seq():
    return load_policy(PROGRAMS / "phiSeq.pol")


@pytest.fixture
def db():
    return load_program(PROGRAMS / "db.cld")


@pytest.fixture
def db_framed():
    return load_program(PROGRAMS / "db_framed.cld")


# one pass/fail line per acceptance criterion in the terminal summary

_criteria = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        n, title = marker
        prev = _criteria.get(n, (title, True))
        _criteria[n] = (prev[0] or title, prev[1] and report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        report.criterion = (m.args[0], m.kwargs.get("title", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok = _criteria[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}: {title}")
