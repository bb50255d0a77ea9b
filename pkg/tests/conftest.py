import pytest

from tempest.engine import available_backends


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


ACCEPTANCE: dict[int, tuple[str, str]] = {}


def record(criterion: int, status: str, detail: str) -> None:
    ACCEPTANCE[criterion] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status:<7} {detail}")
