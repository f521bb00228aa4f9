import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance_log():
    """Record one pass/fail line per acceptance criterion."""

    def log(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE[name] = (ok, detail)

    return log


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n.split()[0].rstrip("."))):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
