import numpy as np
import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng(request):
    # per-test stream keyed by the test name keeps tests independent of ordering
    seed = sum(request.node.name.encode()) * 7919 % (2**32)
    return np.random.default_rng(seed)


@pytest.fixture
def record_criterion():
    """Record one acceptance criterion; the line is printed in the session summary."""

    def record(name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
