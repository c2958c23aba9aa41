"""Repair loop integration on fixture pages with scripted mock LLMs."""

import json

import pytest

from redefix.csspatch import parse_patch_text, scope_patch, serialize
from redefix.dom import parse_html
from redefix.harness import BrowserHarness
from redefix.layout_model import RlfRecord, RlfType
from redefix.llm import LlmClient, LlmConfig
from redefix.repair import (
    LocalizationError,
    RepairError,
    RepairSettings,
    RepairStatus,
    load_external_localization,
    localize,
    repair,
    sweep_and_detect,
    validate,
)

SWEEP = list(range(320, 1401, 10))
CARD = "/html/body/div[1]/div[1]"
PANEL = "/html/body/div[1]"

GOOD = "The card must track its container.\n```css\n#card { width: 100%; }\n```"
BAD = "Try a slightly smaller card.\n```css\n#card { width: 280px; }\n```"
HALLUCINATED = "Use the utility class.\n```css\n.col-md-6 { width: 100%; }\n```"


def settings(**kw):
    defaults = dict(widths=SWEEP, with_screenshots=True, n_majority=5, max_iterations=5)
    defaults.update(kw)
    return RepairSettings(**defaults)


def open_fixture(harness, page_url, name):
    page = harness.open(page_url(name))
    _, records = sweep_and_detect(harness, page, SWEEP, 5)
    return page, records


def client_for(tmp_path, responses):
    script = tmp_path / "mock.json"
    script.write_text(json.dumps(responses))
    return LlmClient(LlmConfig(mock_script=str(script)))


@pytest.fixture()
def protrude(harness, page_url):
    page = harness.open(page_url("protrude.html"))
    rlg, records = sweep_and_detect(harness, page, SWEEP, 5)
    yield harness, page, rlg, records
    harness.close(page)


class TestLocalize:
    def test_protrusion_top_pair_is_card_width(self, protrude):
        harness, page, rlg, records = protrude
        doc = parse_html(harness.page_source(page))
        result = localize(records[0], rlg, harness, page, doc,
                          ["width", "max-width", "min-width", "box-sizing",
                           "overflow", "padding", "border"])
        assert result.ranked[0][0] == CARD
        assert result.ranked[0][1] == "width"
        assert result.ranked[0][2] > 0
        assert len(result.ranked) <= 10

    def test_viewport_top_pair_is_banner_width(self, harness, page_url):
        page, records = open_fixture(harness, page_url, "protrude-viewport.html")
        try:
            rlg, _ = sweep_and_detect(harness, page, SWEEP, 5)
            vp = [r for r in records if r.rlf_type is RlfType.VIEWPORT_PROTRUSION][0]
            doc = parse_html(harness.page_source(page))
            result = localize(vp, rlg, harness, page, doc,
                              ["width", "max-width", "position", "left", "right",
                               "overflow-x"])
            assert result.ranked[0][0] == "/html/body/div[1]"
            assert result.ranked[0][1] == "width"
        finally:
            harness.close(page)

    def test_useless_lexicon_raises_empty_candidates(self, protrude):
        harness, page, rlg, records = protrude
        doc = parse_html(harness.page_source(page))
        with pytest.raises(LocalizationError):
            localize(records[0], rlg, harness, page, doc, ["padding"])

    def test_external_file_passthrough(self, tmp_path):
        path = tmp_path / "loc.json"
        path.write_text(json.dumps([
            {"xpath": CARD, "property": "width", "score": 2.0},
            {"xpath": PANEL, "property": "max-width", "score": 1.0},
        ]))
        result = load_external_localization(path)
        assert result.ranked[0] == (CARD, "width", 2.0)
        assert result.xpaths() == [CARD, PANEL]

    def test_external_file_validation(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[]")
        with pytest.raises(LocalizationError):
            load_external_localization(path)


class TestValidate:
    def test_known_good_patch_accepted_and_left_installed(self, protrude):
        harness, page, rlg, records = protrude
        rlf = records[0]
        scoped = scope_patch(parse_patch_text("#card { width: 100%; }"), rlf.failure_range)
        harness.inject_style(page, serialize(scoped), "good")
        fixed, introduced = validate(harness, page, rlf, records, "good", SWEEP, 5)
        assert fixed and introduced == []
        assert "good" in page.injected_style_ids

    def test_noop_patch_not_fixed_and_removed(self, protrude):
        harness, page, rlg, records = protrude
        rlf = records[0]
        scoped = scope_patch(parse_patch_text("#card { width: 300px; }"), rlf.failure_range)
        harness.inject_style(page, serialize(scoped), "noop")
        fixed, introduced = validate(harness, page, rlf, records, "noop", SWEEP, 5)
        assert not fixed and introduced == []
        assert "noop" not in page.injected_style_ids

    def test_cascading_patch_reports_introduced(self, harness, page_url):
        page, records = open_fixture(harness, page_url, "cascade.html")
        try:
            rlf = records[0]
            assert rlf.rlf_type is RlfType.ELEMENT_PROTRUSION
            scoped = scope_patch(
                parse_patch_text("#panel { position: absolute; width: 400px; }"),
                rlf.failure_range,
            )
            harness.inject_style(page, serialize(scoped), "cascade")
            fixed, introduced = validate(harness, page, rlf, records, "cascade", SWEEP, 5)
            assert fixed
            assert any(r.rlf_type is RlfType.ELEMENT_COLLISION for r in introduced)
            assert "cascade" not in page.injected_style_ids
        finally:
            harness.close(page)


class TestRepairLoop:
    def test_bad_then_good_takes_two_iterations(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        client = client_for(tmp_path, [BAD] * 5 + [GOOD] * 5)
        outcome = repair(harness, page, records[0], records, rlg, client, settings())
        assert outcome.status is RepairStatus.REPAIRED
        assert len(outcome.iterations) == 2
        assert client.calls_made == 10
        retry_prompt = outcome.iterations[1].prompt_text
        assert "The fixed version is still not correct-" in retry_prompt
        assert retry_prompt.startswith(outcome.iterations[0].prompt_text)
        assert outcome.final_patch is not None

        # The accepted patch really eliminated the failure.
        _, after = sweep_and_detect(harness, page, SWEEP, 5)
        assert after == []

    def test_first_good_repairs_in_one_iteration(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        client = client_for(tmp_path, [GOOD] * 5)
        outcome = repair(harness, page, records[0], records, rlg, client, settings())
        assert outcome.status is RepairStatus.REPAIRED
        assert len(outcome.iterations) == 1
        assert client.calls_made == 5

    def test_always_bad_hits_iteration_cap(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        client = client_for(tmp_path, [BAD] * 15)
        outcome = repair(
            harness, page, records[0], records, rlg, client, settings(max_iterations=3)
        )
        assert outcome.status is RepairStatus.FAILED_MAX_ITERATIONS
        assert len(outcome.iterations) == 3
        assert client.calls_made == 15
        assert outcome.final_patch is None

    def test_hallucinated_selector_is_retargeted(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        client = client_for(tmp_path, [HALLUCINATED] * 5)
        outcome = repair(harness, page, records[0], records, rlg, client, settings())
        assert outcome.status is RepairStatus.REPAIRED
        assert outcome.final_patch.patch.rules[0].selector == "#card"

    def test_unparseable_responses_fail_cleanly(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        client = client_for(tmp_path, ["no css at all"] * 5)
        outcome = repair(harness, page, records[0], records, rlg, client, settings())
        assert outcome.status is RepairStatus.FAILED_UNPARSEABLE
        assert outcome.iterations == []

    def test_small_range_is_refused(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        fake = RlfRecord(RlfType.SMALL_RANGE, (CARD, PANEL), (700, 704))
        client = client_for(tmp_path, [GOOD] * 5)
        with pytest.raises(RepairError):
            repair(harness, page, fake, records, rlg, client, settings())

    def test_zero_shot_prompt_has_empty_posts_section(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        client = client_for(tmp_path, [GOOD] * 5)
        outcome = repair(
            harness, page, records[0], records, rlg, client, settings(), kb_store=None
        )
        assert outcome.status is RepairStatus.REPAIRED
        prompt = outcome.iterations[0].prompt_text
        assert "Stack Overflow" not in prompt

    def test_iteration_prompts_nest_as_prefixes(self, protrude, tmp_path):
        harness, page, rlg, records = protrude
        client = client_for(tmp_path, [BAD] * 10 + [GOOD] * 5)
        outcome = repair(harness, page, records[0], records, rlg, client, settings())
        texts = [it.prompt_text for it in outcome.iterations]
        assert len(texts) == 3
        assert texts[1].startswith(texts[0])
        assert texts[2].startswith(texts[1])

    def test_retrieval_augmented_repair_on_collision(self, harness, page_url, tmp_path):
        """Full RAG path: canned knowledge base, retrieval by localized
        properties, posts in the prompt, accepted patch."""
        from pathlib import Path

        from redefix.kb import FixtureStackExchangeClient, KbStore, build_kb
        from redefix.kb.defaults import DEFAULT_PROPERTY_LEXICONS

        canned = Path(__file__).parent / "fixtures" / "canned_so"
        build_kb(
            FixtureStackExchangeClient(canned),
            {RlfType.ELEMENT_COLLISION: ["elements overlap"]},
            {RlfType.ELEMENT_COLLISION: DEFAULT_PROPERTY_LEXICONS[RlfType.ELEMENT_COLLISION]},
            tmp_path / "kb",
        )
        store = KbStore.load(tmp_path / "kb")

        fix = "Shrink the left banner.\n```css\n#left-banner { width: 100px; }\n```"
        client = client_for(tmp_path, [fix] * 5)
        page = harness.open(page_url("collide.html"))
        try:
            rlg, records = sweep_and_detect(harness, page, SWEEP, 5)
            outcome = repair(
                harness, page, records[0], records, rlg, client, settings(),
                kb_store=store,
            )
            assert outcome.status is RepairStatus.REPAIRED
            prompt = outcome.iterations[0].prompt_text
            assert "Stack Overflow" in prompt
            assert "stackoverflow.com/q/" in prompt
        finally:
            harness.close(page)
