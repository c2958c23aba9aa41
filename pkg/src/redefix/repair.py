"""The repair loop: detect, localize, retrieve, prompt, generate, inject,
validate, iterate.

Repairs are cumulative per page: an accepted patch stays installed while
later failures on the same page are repaired, and every accepted patch
lives in its own injected style element so the page's files are never
touched.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .csspatch import (
    CssPatch,
    CssRule,
    MediaScopedPatch,
    SelectorError,
    scope_patch,
    selector_for,
    serialize,
)
from .cssparse import parse_selector, parse_stylesheet, query_all
from .dom import Document, parse_html
from .errors import RedefixError
from .harness import BrowserHarness, PageHandle
from .kb.defaults import DEFAULT_PROPERTY_LEXICONS, load_definitions
from .kb.store import KbStore
from .layout_model import (
    RecordEvaluator,
    ResponsiveLayoutGraph,
    RlfRecord,
    RlfType,
    build_rlg,
    detect_rlfs,
    diff_rlfs,
    records_match,
    refine_failure_ranges,
)
from .llm import AllRunsUnparseableError, LlmClient, majority_patch
from .prompting import PromptBudgetError, RlfContext, build_prompt, build_retry
from .retriever import EnsembleWeights, retrieve_context

log = logging.getLogger(__name__)

# Trial values that neutralize a property's influence during perturbation
# probing. font-size is skipped outright (no neutral value preserves text).
NEUTRAL_TRIAL_VALUES = {
    "width": "auto",
    "max-width": "100%",
    "min-width": "0",
    "position": "static",
    "float": "none",
    "display": "block",
    "margin": "0",
    "padding": "0",
    "flex-wrap": "wrap",
    "overflow-x": "hidden",
    "overflow": "hidden",
    "box-sizing": "border-box",
    "white-space": "normal",
    "top": "auto",
    "left": "auto",
    "right": "auto",
    "bottom": "auto",
    "border": "0",
}
SKIP_TRIAL_PROPS = {"font-size"}

LOCALIZE_KEEP = 10
ANCESTOR_LEVELS = 2


class RepairError(RedefixError):
    pass


class LocalizationError(RepairError):
    pass


class RepairStatus(enum.Enum):
    REPAIRED = "repaired"
    FAILED_TOKEN_BUDGET = "failed_token_budget"
    FAILED_MAX_ITERATIONS = "failed_max_iterations"
    FAILED_UNPARSEABLE = "failed_unparseable"


@dataclass
class LocalizationResult:
    ranked: list[tuple[str, str, float]]  # (xpath, property, score), best first

    def xpaths(self) -> list[str]:
        seen = []
        for xpath, _, _ in self.ranked:
            if xpath not in seen:
                seen.append(xpath)
        return seen

    def properties(self) -> list[str]:
        seen = []
        for _, prop, _ in self.ranked:
            if prop not in seen:
                seen.append(prop)
        return seen


@dataclass
class IterationRecord:
    index: int
    prompt_tokens: int
    prompt_text: str
    candidate: object  # llm.PatchCandidate
    fixed: bool
    introduced: list[RlfRecord]

    @property
    def accepted(self) -> bool:
        return self.fixed and not self.introduced


@dataclass
class RepairOutcome:
    rlf: RlfRecord
    status: RepairStatus
    iterations: list[IterationRecord] = field(default_factory=list)
    final_patch: Optional[MediaScopedPatch] = None


def sweep_and_detect(
    harness: BrowserHarness,
    page: PageHandle,
    widths: list[int],
    small_range_threshold: int,
) -> tuple[ResponsiveLayoutGraph, list[RlfRecord]]:
    """Sample the sweep, detect failures, and refine range boundaries."""
    snapshots = [harness.snapshot_at(page, w) for w in widths]
    rlg = build_rlg(snapshots)
    records = detect_rlfs(rlg, small_range_threshold)
    refined = refine_failure_ranges(
        records, rlg, lambda w: harness.snapshot_at(page, w), small_range_threshold
    )
    return rlg, refined


def load_external_localization(path: str | Path) -> LocalizationResult:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list) or not raw:
        raise LocalizationError(f"external localization must be a non-empty array: {path}")
    ranked = []
    for entry in raw:
        try:
            ranked.append((str(entry["xpath"]), str(entry["property"]), float(entry["score"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise LocalizationError(f"bad localization entry {entry!r}") from exc
    ranked.sort(key=lambda t: -t[2])
    return LocalizationResult(ranked)


def localize(
    rlf: RlfRecord,
    rlg: ResponsiveLayoutGraph,
    harness: BrowserHarness,
    page: PageHandle,
    document: Document,
    property_lexicon: list[str],
    external_file: Optional[str] = None,
) -> LocalizationResult:
    """Rank (element, property) pairs by measured repair leverage.

    Each candidate pair gets a neutralizing trial value injected; the score
    is the reduction of the failure's geometric magnitude at the failure
    range's lower bound. Ties keep participant-before-ancestor order, then
    the lexicon's own property order.
    """
    if external_file:
        return load_external_localization(external_file)

    evaluator = RecordEvaluator(rlf, rlg)
    floor_width = rlf.failure_range[0]
    snapshot = rlg.snapshots.get(floor_width) or harness.snapshot_at(page, floor_width)
    baseline = evaluator.magnitude(snapshot)

    candidates: list[str] = []
    for participant in rlf.participants:
        if participant not in candidates:
            candidates.append(participant)
    for participant in rlf.participants:
        cur = participant
        for _ in range(ANCESTOR_LEVELS):
            cur = snapshot.parent_map.get(cur)
            if cur is None:
                break
            if cur not in candidates:
                candidates.append(cur)

    scored: list[tuple[float, int, int, str, str]] = []
    for elem_rank, xpath in enumerate(candidates):
        try:
            selector = selector_for(xpath, document)
        except SelectorError:
            log.debug("skipping unlocalizable element %s", xpath)
            continue
        for lex_rank, prop in enumerate(property_lexicon):
            if prop in SKIP_TRIAL_PROPS:
                continue
            trial_value = NEUTRAL_TRIAL_VALUES.get(prop)
            if trial_value is None:
                continue
            marker = f"redefix-trial-{elem_rank}-{lex_rank}"
            css = f"{selector} {{ {prop}: {trial_value} !important; }}"
            harness.inject_style(page, css, marker)
            try:
                patched = harness.snapshot_at(page, floor_width)
            finally:
                harness.remove_style(page, marker)
            reduction = baseline - evaluator.magnitude(patched)
            if reduction > 0:
                scored.append((reduction, elem_rank, lex_rank, xpath, prop))

    if not scored:
        raise LocalizationError(
            f"no (element, property) candidate reduces the failure: {rlf.to_json()}"
        )
    scored.sort(key=lambda t: (-t[0], t[1], t[2]))
    ranked = [(xpath, prop, score) for score, _, _, xpath, prop in scored[:LOCALIZE_KEEP]]
    return LocalizationResult(ranked)


def validate(
    harness: BrowserHarness,
    page: PageHandle,
    rlf: RlfRecord,
    baseline: list[RlfRecord],
    marker_id: str,
    widths: list[int],
    small_range_threshold: int,
) -> tuple[bool, list[RlfRecord]]:
    """Re-sweep the patched page and diff against the baseline.

    The injected patch stays installed only when the target failure is gone
    and nothing new appeared.
    """
    _, current = sweep_and_detect(harness, page, widths, small_range_threshold)
    eliminated, introduced = diff_rlfs(baseline, current)
    fixed = any(records_match(r, rlf) for r in eliminated)
    accepted = fixed and not introduced
    if not accepted:
        harness.remove_style(page, marker_id)
    return fixed, introduced


def retarget_rules(
    patch: CssPatch,
    localized: LocalizationResult,
    document: Document,
    harness: BrowserHarness,
    page: PageHandle,
) -> CssPatch:
    """Keep LLM-emitted selectors only when they hit exactly one localized
    element in the live page; re-target anything else onto the top-ranked
    localized element. Guards against hallucinated class names."""
    localized_elements = set()
    for xpath in localized.xpaths():
        el = document.resolve_xpath(xpath)
        if el is not None:
            localized_elements.add(el)

    fallback_selector = selector_for(localized.xpaths()[0], document)
    rules = []
    for rule in patch.rules:
        keep = False
        matches = query_all(document.root, rule.selector)
        if len(matches) == 1 and matches[0] in localized_elements:
            try:
                keep = harness.selector_match_count(page, rule.selector) == 1
            except RedefixError:
                keep = False
        selector = rule.selector if keep else fallback_selector
        rules.append(CssRule(selector, rule.declarations))
    return CssPatch(tuple(rules))


@dataclass
class RepairSettings:
    widths: list[int]
    small_range_threshold: int = 5
    weights: EnsembleWeights = field(default_factory=EnsembleWeights)
    top_k: int = 5
    max_iterations: int = 5
    n_majority: int = 5
    prompt_budget: int = 123904
    region_padding: int = 40
    image_token_cost: int = 1600
    with_screenshots: bool = True


def repair(
    harness: BrowserHarness,
    page: PageHandle,
    rlf: RlfRecord,
    baseline: list[RlfRecord],
    rlg: ResponsiveLayoutGraph,
    llm_client: LlmClient,
    settings: RepairSettings,
    kb_store: Optional[KbStore] = None,
    localization_file: Optional[str] = None,
    embedder=None,
    definitions: Optional[dict[RlfType, str]] = None,
    lexicons: Optional[dict[RlfType, list[str]]] = None,
) -> RepairOutcome:
    """Run the iterative repair loop for one failure.

    ``kb_store=None`` is zero-shot mode: no retrieval, empty posts section.
    Small-range failures are excluded by contract and rejected here.
    """
    if rlf.rlf_type is RlfType.SMALL_RANGE:
        raise RepairError("small-range failures are reported but not repaired")

    definitions = definitions or load_definitions()
    lexicons = lexicons or DEFAULT_PROPERTY_LEXICONS
    lexicon = lexicons.get(rlf.rlf_type, [])
    document = parse_html(harness.page_source(page))

    localized = localize(
        rlf, rlg, harness, page, document, lexicon, external_file=localization_file
    )

    retrieved = []
    if kb_store is not None:
        retrieved = retrieve_context(
            localized.properties(), rlf.rlf_type, kb_store,
            weights=settings.weights, k=settings.top_k, embedder=embedder,
        )

    lo, hi = rlf.failure_range
    floor_snapshot = rlg.snapshots.get(lo) or harness.snapshot_at(page, lo)
    coordinates = {
        xpath: floor_snapshot.node(xpath).box
        for xpath in rlf.participants
        if floor_snapshot.node(xpath) is not None
    }

    shot_inside = shot_outside = None
    if settings.with_screenshots:
        try:
            shot_inside = harness.screenshot_region(
                page, lo, list(rlf.participants), settings.region_padding
            )
            shot_outside = harness.screenshot_region(
                page, hi + 1, list(rlf.participants), settings.region_padding
            )
        except RedefixError as exc:
            log.warning("screenshot capture failed, continuing text-only: %s", exc)

    ctx = RlfContext(
        rlf=rlf,
        rlf_definition=definitions[rlf.rlf_type],
        localized=[(xpath, prop) for xpath, prop, _ in localized.ranked],
        coordinates=coordinates,
        page_excerpt=_page_excerpt(document, localized.xpaths()),
        screenshot_inside=shot_inside,
        screenshot_outside=shot_outside,
    )

    outcome = RepairOutcome(rlf=rlf, status=RepairStatus.FAILED_MAX_ITERATIONS)
    try:
        prompt = build_prompt(
            ctx, retrieved, settings.prompt_budget, settings.image_token_cost
        )
    except PromptBudgetError:
        outcome.status = RepairStatus.FAILED_TOKEN_BUDGET
        return outcome

    for index in range(1, settings.max_iterations + 1):
        try:
            candidate = majority_patch(llm_client, prompt, settings.n_majority)
        except AllRunsUnparseableError:
            outcome.status = RepairStatus.FAILED_UNPARSEABLE
            return outcome

        targeted = retarget_rules(candidate.patch, localized, document, harness, page)
        scoped = scope_patch(targeted, rlf.failure_range)
        marker = f"redefix-patch-{rlf.rlf_type.value}-{lo}-{hi}-it{index}"
        harness.inject_style(page, serialize(scoped), marker)
        fixed, introduced = validate(
            harness, page, rlf, baseline, marker,
            settings.widths, settings.small_range_threshold,
        )
        record = IterationRecord(
            index=index,
            prompt_tokens=prompt.token_estimate,
            prompt_text=prompt.text,
            candidate=candidate,
            fixed=fixed,
            introduced=introduced,
        )
        outcome.iterations.append(record)
        log.info(
            "iteration %d for %s: fixed=%s introduced=%d",
            index, rlf.rlf_type.value, fixed, len(introduced),
        )
        if record.accepted:
            outcome.status = RepairStatus.REPAIRED
            outcome.final_patch = scoped
            return outcome

        try:
            prompt = build_retry(prompt, candidate.patch)
        except PromptBudgetError:
            outcome.status = RepairStatus.FAILED_TOKEN_BUDGET
            return outcome

    outcome.status = RepairStatus.FAILED_MAX_ITERATIONS
    return outcome


def _page_excerpt(document: Document, xpaths: list[str], limit: int = 4000) -> str:
    """Participants, their ancestor chain and the page's style rules,
    bounded to a fixed character budget."""
    parts: list[str] = []
    seen = set()
    for xpath in xpaths:
        el = document.resolve_xpath(xpath)
        if el is None:
            continue
        chain = [el] + list(el.ancestors())
        for node in chain:
            if id(node) in seen or node.tag in ("html", "body"):
                continue
            seen.add(id(node))
            attrs = " ".join(f'{k}="{v}"' for k, v in sorted(node.attrs.items()))
            parts.append(f"<{node.tag}{' ' + attrs if attrs else ''}> at {node.xpath()}")

    matched_rules = []
    elements = [document.resolve_xpath(x) for x in xpaths]
    elements = [e for e in elements if e is not None]
    for sheet in document.style_texts():
        for rule in parse_stylesheet(sheet):
            sel = parse_selector(rule.selector)
            if sel is None:
                continue
            if any(sel.matches(e) or any(sel.matches(a) for a in e.ancestors()) for e in elements):
                decls = "; ".join(
                    f"{d.prop}: {d.value}{' !important' if d.important else ''}"
                    for d in rule.declarations
                )
                prefix = ""
                if rule.media is not None:
                    parts_mq = []
                    if rule.media.min_width is not None:
                        parts_mq.append(f"(min-width: {rule.media.min_width:g}px)")
                    if rule.media.max_width is not None:
                        parts_mq.append(f"(max-width: {rule.media.max_width:g}px)")
                    prefix = "@media " + " and ".join(parts_mq) + " "
                matched_rules.append(f"{prefix}{rule.selector} {{ {decls} }}")

    excerpt = "\n".join(parts + matched_rules)
    return excerpt[:limit]
