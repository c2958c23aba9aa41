"""Page-level repair orchestration, report files and the HTML summary.

``report.json`` is fully deterministic for fixed inputs (no timestamps);
wall-clock metadata lives in the sibling ``run_meta.json``. Screenshots and
serialized patches are written next to the report so the HTML summary can
be reviewed offline.
"""

from __future__ import annotations

import datetime
import html
import json
import logging
from pathlib import Path
from typing import Optional

from .config import RunConfig
from .csspatch import serialize
from .errors import RedefixError
from .harness import BrowserHarness
from .kb.store import KbStore
from .layout_model import RlfRecord, RlfType, records_match
from .llm import LlmClient
from .repair import (
    RepairOutcome,
    RepairSettings,
    RepairStatus,
    repair,
    sweep_and_detect,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ReportError(RedefixError):
    pass


def _settings_from_config(config: RunConfig, with_screenshots: bool) -> RepairSettings:
    return RepairSettings(
        widths=config.sweep.widths(),
        small_range_threshold=config.small_range_threshold,
        weights=config.weights,
        top_k=config.top_k,
        max_iterations=config.max_iterations,
        n_majority=config.n_majority,
        prompt_budget=config.prompt_budget,
        region_padding=config.region_padding,
        image_token_cost=config.image_token_cost,
        with_screenshots=with_screenshots,
    )


def _outcome_json(outcome: RepairOutcome, artifacts: dict) -> dict:
    return {
        "rlf": outcome.rlf.to_json(),
        "status": outcome.status.value,
        "iterations": [
            {
                "index": it.index,
                "prompt_tokens": it.prompt_tokens,
                "patch_key": it.candidate.normalized_key,
                "fixed": it.fixed,
                "introduced": [r.to_json() for r in it.introduced],
            }
            for it in outcome.iterations
        ],
        "final_patch_css": serialize(outcome.final_patch) if outcome.final_patch else None,
        "artifacts": artifacts,
    }


def run_page_repair(
    harness: BrowserHarness,
    llm_client: LlmClient,
    config: RunConfig,
    target: str,
    kb_store: Optional[KbStore],
    output_dir: str | Path,
    rlf_index: Optional[int] = None,
    localization_file: Optional[str] = None,
    with_screenshots: bool = True,
    display_url: Optional[str] = None,
) -> dict:
    """Repair every repairable failure on one page, cumulatively.

    Accepted patches stay installed while later failures are processed. A
    failure that disappears because of an earlier patch is reported as
    ``resolved_by_prior_patch`` and not counted as attempted.
    """
    out_root = Path(output_dir)
    shots_dir = out_root / "screenshots"
    patches_dir = out_root / "patches"
    for d in (out_root, shots_dir, patches_dir):
        d.mkdir(parents=True, exist_ok=True)

    settings = _settings_from_config(config, with_screenshots)
    page = harness.open(target)
    try:
        rlg, baseline = sweep_and_detect(
            harness, page, settings.widths, settings.small_range_threshold
        )
        targets = [r for r in baseline if r.rlf_type is not RlfType.SMALL_RANGE]
        if rlf_index is not None:
            if not 0 <= rlf_index < len(baseline):
                raise ReportError(f"--rlf-index {rlf_index} out of range (0..{len(baseline) - 1})")
            chosen = baseline[rlf_index]
            if chosen.rlf_type is RlfType.SMALL_RANGE:
                raise ReportError("small-range failures are reported but not repaired")
            targets = [chosen]

        outcomes = []
        attempted = repaired = 0
        for n, rlf in enumerate(targets):
            slug = f"rlf-{n}-{rlf.rlf_type.value}"
            artifacts: dict = {}

            current_rlg, current_records = rlg, baseline
            if attempted or repaired:
                current_rlg, current_records = sweep_and_detect(
                    harness, page, settings.widths, settings.small_range_threshold
                )
            live = [r for r in current_records if records_match(r, rlf)]
            if not live:
                outcomes.append(
                    {
                        "rlf": rlf.to_json(),
                        "status": "resolved_by_prior_patch",
                        "iterations": [],
                        "final_patch_css": None,
                        "artifacts": {},
                    }
                )
                continue
            rlf_now = live[0]

            if with_screenshots:
                try:
                    before = harness.screenshot_region(
                        page, rlf_now.failure_range[0], list(rlf_now.participants),
                        settings.region_padding,
                    )
                    before_path = shots_dir / f"{slug}-before.png"
                    before_path.write_bytes(before.png_bytes)
                    artifacts["before"] = str(before_path.relative_to(out_root))
                except RedefixError as exc:
                    log.warning("before-screenshot failed: %s", exc)

            attempted += 1
            outcome = repair(
                harness, page, rlf_now, current_records, current_rlg,
                llm_client, settings,
                kb_store=kb_store,
                localization_file=localization_file,
            )
            if outcome.status is RepairStatus.REPAIRED:
                repaired += 1
                patch_path = patches_dir / f"{slug}.css"
                patch_path.write_text(serialize(outcome.final_patch))
                artifacts["patch"] = str(patch_path.relative_to(out_root))
                if with_screenshots:
                    try:
                        after = harness.screenshot_region(
                            page, rlf_now.failure_range[0], list(rlf_now.participants),
                            settings.region_padding,
                        )
                        after_path = shots_dir / f"{slug}-after.png"
                        after_path.write_bytes(after.png_bytes)
                        artifacts["after"] = str(after_path.relative_to(out_root))
                    except RedefixError as exc:
                        log.warning("after-screenshot failed: %s", exc)
            outcomes.append(_outcome_json(outcome, artifacts))

        report = {
            "schema_version": SCHEMA_VERSION,
            "page": display_url or target,
            "baseline": [r.to_json() for r in baseline],
            "outcomes": outcomes,
            "totals": {"attempted": attempted, "repaired": repaired},
        }
        write_report(report, out_root)
        return report
    finally:
        harness.close(page)


def write_report(report: dict, output_dir: str | Path) -> Path:
    out_root = Path(output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    path = out_root / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    meta = {"created_at": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    (out_root / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def render_html_report(output_dir: str | Path) -> Path:
    """Static before/after gallery for offline human review."""
    out_root = Path(output_dir)
    report_path = out_root / "report.json"
    if not report_path.exists():
        raise ReportError(f"no report.json under {out_root}")
    report = json.loads(report_path.read_text())

    rows = []
    for outcome in report.get("outcomes", []):
        rlf = outcome["rlf"]
        artifacts = outcome.get("artifacts", {})
        cells = []
        for label, key in (("version 1", "before"), ("version 2", "after")):
            if key in artifacts:
                cells.append(
                    f'<figure><img src="{html.escape(artifacts[key])}" alt="screenshot">'
                    f"<figcaption>{label}</figcaption></figure>"
                )
            else:
                cells.append(f"<figure><em>{label}: no capture</em></figure>")
        patch_block = ""
        if outcome.get("final_patch_css"):
            patch_block = f"<pre>{html.escape(outcome['final_patch_css'])}</pre>"
        rows.append(
            "<section>"
            f"<h2>{html.escape(rlf['type'])} "
            f"[{rlf['range'][0]}px..{rlf['range'][1]}px] - {html.escape(outcome['status'])}</h2>"
            f"<p>participants: {html.escape(', '.join(rlf['participants']))}</p>"
            f'<div class="pair">{cells[0]}{cells[1]}</div>'
            f"{patch_block}"
            "</section>"
        )

    totals = report.get("totals", {})
    doc = f"""<!doctype html>
<html><head><meta charset="utf-8"><title>repair report</title>
<style>
body {{ font-family: sans-serif; margin: 2rem; }}
.pair {{ display: flex; gap: 2rem; }}
figure {{ margin: 0; }}
img {{ max-width: 540px; border: 1px solid #999; }}
pre {{ background: #f4f4f4; padding: 1rem; overflow-x: auto; }}
</style></head>
<body>
<h1>Repair report: {html.escape(str(report.get('page', '')))}</h1>
<p>attempted {totals.get('attempted', 0)}, repaired {totals.get('repaired', 0)}</p>
{''.join(rows)}
</body></html>
"""
    index = out_root / "index.html"
    index.write_text(doc)
    return index
