import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_verdicts: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(criterion: str, passed: bool, detail: str):
        line = f"{criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        _verdicts.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_verdicts, key=lambda s: int(s.split(":")[0][1:])):
            terminalreporter.write_line(line)
