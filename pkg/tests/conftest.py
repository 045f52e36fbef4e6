import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, passed, detail); filled by the acceptance suite
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, title: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (title, passed, detail)
    print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")
    missing = sorted(set(range(1, 17)) - set(ACCEPTANCE))
    if missing:
        terminalreporter.write_line(f"not run: {missing}")
