"""Command-line entry point.

Exit codes are part of the contract: detect returns 0 for a clean page and
3 when failures were found; repair returns 0 when every attempted failure
was repaired and 4 otherwise; kb build returns 2 on a partial (quota-bound)
build; configuration and harness errors exit 1.
"""

from __future__ import annotations

import contextlib
import json
import logging
import os
import sys
from pathlib import Path

import click

from . import __version__
from .config import RunConfig, load_config
from .devbrowser import DevBrowserServer
from .errors import RedefixError
from .harness import BrowserHarness, StaticFileServer
from .kb.defaults import DEFAULT_KEYWORDS, DEFAULT_PROPERTY_LEXICONS
from .kb.stackexchange import API_KEY_ENV, FixtureStackExchangeClient, StackExchangeClient
from .kb.store import KbError, KbStore, build_kb
from .layout_model import RlfType
from .llm import LlmClient
from .repair import sweep_and_detect
from .report import ReportError, render_html_report, run_page_repair

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2
EXIT_RLFS_FOUND = 3
EXIT_UNREPAIRED = 4


@contextlib.contextmanager
def _open_endpoint(config: RunConfig, override: str | None):
    """Yield (endpoint URL, settle delay), spawning the offline renderer
    when configured as ``devbrowser``. The renderer lays out synchronously,
    so it gets no settle delay."""
    endpoint = override or config.webdriver_endpoint
    if endpoint == "devbrowser":
        with DevBrowserServer() as server:
            yield server.endpoint, 0.0
    else:
        yield endpoint, config.settle_delay


@contextlib.contextmanager
def _resolve_target(target: str):
    """Local paths are served over an embedded static file server; URLs
    pass through."""
    if target.startswith(("http://", "https://", "file://")):
        yield target
        return
    path = Path(target)
    if not path.exists():
        raise click.ClickException(f"target not found: {target}")
    with StaticFileServer(path.parent) as server:
        yield server.url_for(path.name)


def _load_run_config(config_path: str | None) -> RunConfig:
    try:
        return load_config(config_path)
    except RedefixError as exc:
        raise click.ClickException(str(exc))


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.group()
def kb():
    """Build and inspect the Stack Overflow knowledge base."""


@kb.command("build")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--kb-path", type=click.Path(), default=None, help="Output directory.")
@click.option("--fixture", type=click.Path(exists=True), default=None,
              help="Canned API fixture directory instead of the live API.")
def kb_build(config_path, kb_path, fixture):
    """Ingest, filter and persist per-failure-type document stores."""
    config = _load_run_config(config_path)
    kb_dir = kb_path or config.kb_path
    if fixture:
        client = FixtureStackExchangeClient(fixture)
    elif os.environ.get(API_KEY_ENV):
        client = StackExchangeClient()
    else:
        click.echo(f"error: set {API_KEY_ENV} or pass --fixture", err=True)
        sys.exit(EXIT_FAILURE)
    try:
        result = build_kb(client, DEFAULT_KEYWORDS, DEFAULT_PROPERTY_LEXICONS, kb_dir)
    except RedefixError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)
    click.echo(json.dumps(result.stats, indent=2, sort_keys=True))
    sys.exit(EXIT_OK if result.complete else EXIT_PARTIAL)


@kb.command("stats")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--kb-path", type=click.Path(), default=None)
def kb_stats(config_path, kb_path):
    """Print the persisted store's stats record."""
    config = _load_run_config(config_path)
    stats_path = Path(kb_path or config.kb_path) / "stats.json"
    if not stats_path.exists():
        click.echo(f"error: no stats at {stats_path}", err=True)
        sys.exit(EXIT_FAILURE)
    click.echo(stats_path.read_text().rstrip())
    sys.exit(EXIT_OK)


@main.command()
@click.argument("url")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--webdriver", default=None, help="WebDriver endpoint URL or 'devbrowser'.")
def detect(url, config_path, webdriver):
    """Detect layout failures and print them as a JSON array."""
    config = _load_run_config(config_path)
    try:
        with _open_endpoint(config, webdriver) as (endpoint, settle), \
                _resolve_target(url) as target:
            harness = BrowserHarness(endpoint, settle_delay=settle)
            page = harness.open(target)
            try:
                _, records = sweep_and_detect(
                    harness, page, config.sweep.widths(), config.small_range_threshold
                )
            finally:
                harness.close(page)
    except RedefixError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)
    click.echo(json.dumps([r.to_json() for r in records], indent=2))
    sys.exit(EXIT_RLFS_FOUND if records else EXIT_OK)


@main.command()
@click.argument("urls", nargs=-1, required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--webdriver", default=None, help="WebDriver endpoint URL or 'devbrowser'.")
@click.option("--kb-path", type=click.Path(), default=None)
@click.option("--output", "output_dir", type=click.Path(), default=None)
@click.option("--rlf-index", type=int, default=None,
              help="Repair only the n-th detected failure (0-based).")
@click.option("--mock-llm", type=click.Path(exists=True), default=None,
              help="JSON array of scripted responses instead of a live model.")
@click.option("--localization-file", type=click.Path(exists=True), default=None)
@click.option("--zero-shot", is_flag=True, help="Skip retrieval; prompt without SO posts.")
@click.option("--no-screenshots", is_flag=True, help="Skip screenshot capture.")
@click.option("--jobs", type=int, default=None,
              help="Pages repaired concurrently, one browser session each.")
def repair(urls, config_path, webdriver, kb_path, output_dir, rlf_index, mock_llm,
           localization_file, zero_shot, no_screenshots, jobs):
    """Repair detected failures and write a report per page."""
    config = _load_run_config(config_path)
    if mock_llm:
        config.llm.mock_script = mock_llm
    out_dir = Path(output_dir or config.output_dir)
    n_jobs = max(1, jobs or config.jobs)

    kb_store = None
    if not zero_shot:
        kb_dir = kb_path or config.kb_path
        try:
            kb_store = KbStore.load(kb_dir)
        except KbError as exc:
            click.echo(f"error: {exc} (build it with 'redefix kb build' or pass --zero-shot)",
                       err=True)
            sys.exit(EXIT_FAILURE)

    def one_page(url: str, page_out: Path) -> dict:
        # Each job gets its own browser session and LLM client (the mock
        # script cursor is sequential per client).
        llm_client = LlmClient(config.llm)
        with _resolve_target(url) as target:
            harness = BrowserHarness(endpoint, settle_delay=settle)
            return run_page_repair(
                harness, llm_client, config, target, kb_store, page_out,
                rlf_index=rlf_index,
                localization_file=localization_file,
                with_screenshots=not no_screenshots,
                display_url=url,
            )

    reports = []
    try:
        with _open_endpoint(config, webdriver) as (endpoint, settle):
            if len(urls) == 1:
                reports.append((urls[0], out_dir, one_page(urls[0], out_dir)))
            elif n_jobs == 1:
                for i, url in enumerate(urls):
                    page_out = out_dir / f"page-{i}"
                    reports.append((url, page_out, one_page(url, page_out)))
            else:
                from concurrent.futures import ThreadPoolExecutor

                with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                    futures = [
                        (url, out_dir / f"page-{i}",
                         pool.submit(one_page, url, out_dir / f"page-{i}"))
                        for i, url in enumerate(urls)
                    ]
                    reports = [(url, page_out, f.result()) for url, page_out, f in futures]
    except RedefixError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)

    all_ok = True
    for url, page_out, report in reports:
        totals = report["totals"]
        click.echo(f"{url}: {json.dumps(totals)} -> {page_out / 'report.json'}")
        if totals["repaired"] != totals["attempted"]:
            all_ok = False
    sys.exit(EXIT_OK if all_ok else EXIT_UNREPAIRED)


@main.command()
@click.argument("output_dir", type=click.Path())
def report(output_dir):
    """Render the static HTML summary for an existing report."""
    try:
        index = render_html_report(output_dir)
    except ReportError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)
    click.echo(str(index))
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=0)
def devbrowser(host, port):
    """Run the embedded offline renderer as a standalone WebDriver endpoint."""
    server = DevBrowserServer(host, port).start()
    click.echo(server.endpoint)
    try:
        import signal

        signal.pause()
    except (KeyboardInterrupt, AttributeError):
        pass
    finally:
        server.stop()


if __name__ == "__main__":
    main()
