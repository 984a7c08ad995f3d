import pytest

from aoii_eh import ModelParams, build_kernel

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def default_params():
    return ModelParams(p=0.7, mu=0.5, cap_e=10, c_s=1, c_t=1, n_max=20)


@pytest.fixture(scope="session")
def default_kernel(default_params):
    return build_kernel(default_params)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
