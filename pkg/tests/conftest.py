import contextlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Context manager recording one pass/fail line per acceptance criterion."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        info: dict = {}
        try:
            yield info
        except BaseException as exc:
            line = f"criterion {number} FAIL: {title} ({type(exc).__name__}: {exc})"
            _ACCEPTANCE[number] = line.splitlines()[0]
            print(_ACCEPTANCE[number])
            raise
        detail = f" [{info['detail']}]" if "detail" in info else ""
        _ACCEPTANCE[number] = f"criterion {number} PASS: {title}{detail}"
        print(_ACCEPTANCE[number])

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
