import numpy as np
import pytest

from sensikit import FactorGroup, PickFreezeBlock

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def hand_block():
    return PickFreezeBlock(FactorGroup.of(0), [1.0, 2.0], [3.0, 0.0], [2.0, 1.0], [0.0, 4.0])


@pytest.fixture
def hand_block_current():
    return PickFreezeBlock(FactorGroup.of(0), [1.0, 2.0], [3.0, 0.0], [2.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class AcceptanceRecorder:
    def __init__(self, name: str):
        self.name = name
        self.details: list[str] = []

    def note(self, text: str) -> None:
        self.details.append(text)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    rec = AcceptanceRecorder(request.node.name)
    yield rec
    failed = getattr(request.node, "rep_call", None)
    passed = failed is not None and failed.passed
    _ACCEPTANCE.append((rec.name, passed, "; ".join(rec.details)))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        line = f"{'PASS' if passed else 'FAIL'}  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
