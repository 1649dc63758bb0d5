from contextlib import contextmanager

import pytest

# criterion number -> (title, passed, detail), filled by the acceptance suite
ACCEPTANCE = {}


@contextmanager
def _record(number, title):
    details = []
    try:
        yield details.append
    except BaseException as exc:
        msg = str(exc).strip().splitlines()
        ACCEPTANCE[number] = (title, False, f"{type(exc).__name__}: {msg[0] if msg else ''}")
        raise
    else:
        ACCEPTANCE[number] = (title, True, "; ".join(details))
    finally:
        title, passed, detail = ACCEPTANCE[number]
        print(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  [{detail}]")


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion; yields a detail logger."""
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  [{detail}]")
