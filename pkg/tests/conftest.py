import os

import pytest

from curvadapt import harness


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("reference-cache")
    old = os.environ.get(harness.CACHE_ENV)
    os.environ[harness.CACHE_ENV] = str(path)
    yield path
    if old is None:
        os.environ.pop(harness.CACHE_ENV, None)
    else:
        os.environ[harness.CACHE_ENV] = old


@pytest.fixture(scope="session")
def dolly_reference(cache_dir):
    """Fixed-step CDM dolly run at 1e-6 s over 0.25 s, shared by the session."""
    return harness.reference_run("dolly", harness.DOLLY_REFERENCE_DT, horizon=harness.DOLLY_HORIZON)


@pytest.fixture(scope="session")
def dolly_controllers(cache_dir, dolly_reference):
    return harness.run_experiment("dolly-controllers")


@pytest.fixture(scope="session")
def bounce_controllers():
    return harness.run_experiment("bounce-controllers")


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL line per acceptance criterion that ran."""
    try:
        from test_acceptance import summary_lines
    except ImportError:
        return
    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
