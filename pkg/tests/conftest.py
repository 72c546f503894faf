import pytest

RESULTS_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: full-budget acceptance criteria (several minutes)")
    config.stash[RESULTS_KEY] = []


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[RESULTS_KEY]
    if results:
        terminalreporter.section("acceptance criteria")
        for r in sorted(results, key=lambda r: r.criterion):
            terminalreporter.write_line(r.line())
