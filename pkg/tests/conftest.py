import pytest

# criterion number -> (PASS/FAIL/..., detail), filled by the acceptance suite
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail, gating=True):
        status = ("PASS" if ok else "FAIL") if gating else "REPORT"
        ACCEPTANCE[number] = (status, detail)
        assert ok or not gating, f"criterion {number}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{status} criterion {number}: {detail}")
