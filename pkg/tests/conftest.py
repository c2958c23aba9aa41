import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from redefix.devbrowser import DevBrowserServer
from redefix.harness import BrowserHarness, StaticFileServer

FIXTURE_PAGES = Path(__file__).parent / "fixtures" / "pages"


@pytest.fixture(scope="session")
def devbrowser():
    server = DevBrowserServer().start()
    yield server
    server.stop()


@pytest.fixture(scope="session")
def file_server():
    server = StaticFileServer(FIXTURE_PAGES).start()
    yield server
    server.stop()


@pytest.fixture()
def harness(devbrowser):
    # The offline renderer needs no settle delay; keeps sweeps fast.
    return BrowserHarness(devbrowser.endpoint, settle_delay=0.0)


@pytest.fixture()
def page_url(file_server):
    def _url(name: str) -> str:
        return file_server.url_for(name)

    return _url


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    results = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance" in getattr(rep, "nodeid", "") and rep.when == "call":
                name = rep.nodeid.split("::")[-1]
                results.append((name, status == "passed"))
    if results:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for name, ok in results:
            terminalreporter.write_line(f"  {name}: {'PASS' if ok else 'FAIL'}")
