from collections import defaultdict

import pytest

# criterion number -> list of (part, passed, detail)
_ACCEPTANCE = defaultdict(list)


@pytest.fixture
def record():
    """``record(criterion, part, passed, detail)`` for the acceptance summary."""
    def _record(criterion, part, passed, detail):
        _ACCEPTANCE[criterion].append((part, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[n]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}: {d} [{'ok' if ok else 'FAIL'}]" for p, ok, d in parts)
        terminalreporter.write_line(f"criterion {n:2d} {status}  {detail}")
