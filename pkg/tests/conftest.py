import pytest

from printcan.kernels import available_backends

BACKENDS = available_backends()

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(BACKENDS))
def kernels(request):
    return BACKENDS[request.param]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
