import pytest

from hiermarket.experiments import appendix_instance


@pytest.fixture
def appendix():
    return appendix_instance(0.2)


@pytest.fixture
def appendix0():
    return appendix_instance(0.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
