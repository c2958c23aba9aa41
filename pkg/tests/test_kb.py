from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from redefix.kb import (
    FixtureStackExchangeClient,
    KbDocument,
    KbStore,
    SoAnswer,
    SoComment,
    SoQuestion,
    build_kb,
    clean_html,
    fetch_questions,
    filter_and_bundle,
    rake_keywords,
)
from redefix.kb.defaults import DEFAULT_PROPERTY_LEXICONS
from redefix.kb.store import _CODE_SPAN_RE
from redefix.layout_model import RlfType

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "canned_so"
COLLISION_LEXICON = DEFAULT_PROPERTY_LEXICONS[RlfType.ELEMENT_COLLISION]


class TestRake:
    def test_single_candidate_phrase(self):
        ranked = rake_keywords("elements collide with each other", {"with", "each", "other"})
        assert ranked[0][0] == "elements collide"

    def test_all_stopwords_yield_nothing(self):
        assert rake_keywords("with each other", {"with", "each", "other"}) == []

    def test_empty_text(self):
        assert rake_keywords("", {"the"}) == []

    def test_collision_definition_hand_executed(self):
        # Hand execution on the shipped collision definition fragment:
        # candidates: [elements collide], [overlap], [viewport], [narrower]
        # freq all 1; degree: elements=2, collide=2, overlap=1, viewport=1,
        # narrower=1; phrase scores 4, 1, 1, 1.
        text = "elements collide and overlap each other when the viewport becomes narrower"
        stopwords = {"and", "each", "other", "when", "the", "becomes"}
        assert rake_keywords(text, stopwords) == [
            ("elements collide", 4.0),
            ("overlap", 1.0),
            ("viewport", 1.0),
            ("narrower", 1.0),
        ]

    def test_repeated_words_raise_degree(self):
        # "width overflow" and "width" as candidates: freq(width)=2,
        # degree(width)=2+1=3, degree(overflow)=2 -> scores 1.5 and 2.0.
        ranked = dict(rake_keywords("width overflow, width", {"the"}))
        assert ranked["width overflow"] == pytest.approx(1.5 + 2.0)
        assert ranked["width"] == pytest.approx(1.5)


class TestCleanHtml:
    def test_code_preserved_verbatim(self):
        assert (
            clean_html("<p>use <code>display:flex</code> here</p>")
            == "use <code>display:flex</code> here"
        )

    def test_plain_text_identity(self):
        assert clean_html("plain text") == "plain text"

    def test_entities_decoded(self):
        assert clean_html("<div>a&amp;b</div>") == "a&b"

    def test_whitespace_collapsed_outside_code(self):
        assert (
            clean_html("<p>a   b</p>\n<pre><code>x   y</code></pre>")
            == "a b <code>x   y</code>"
        )

    def test_nested_markup_stripped(self):
        assert clean_html("<div><b>bold</b> and <i>italic</i></div>") == "bold and italic"

    def test_angle_bracket_entity_outside_code_is_reescaped(self):
        cleaned = clean_html("<p>a &lt; b</p>")
        assert "<" not in _CODE_SPAN_RE.sub("", cleaned)

    @given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=200))
    def test_output_has_no_markup_outside_code(self, body):
        cleaned = clean_html(body)
        assert "<" not in _CODE_SPAN_RE.sub("", cleaned)


def question(qid=101, tags=("css",), body="<p>text</p>", answer_count=0, comment_count=0):
    return SoQuestion(
        id=qid,
        link=f"https://stackoverflow.com/q/{qid}",
        title="t",
        body=body,
        score=1,
        tags=tuple(tags),
        answer_count=answer_count,
        comment_count=comment_count,
    )


class TestFilterAndBundle:
    def test_zero_score_answer_and_no_comments_discards(self):
        q = question(answer_count=1)
        ans = [SoAnswer(id=1, score=0, body="<p>width fix</p>")]
        assert filter_and_bundle(q, ans, [], COLLISION_LEXICON, RlfType.ELEMENT_COLLISION) is None

    def test_scored_answer_with_lexicon_mention_survives(self):
        lex = ["box-sizing"]
        q = question(answer_count=1)
        ans = [SoAnswer(id=1, score=3, body="<p>use <code>box-sizing</code></p>")]
        doc = filter_and_bundle(q, ans, [], lex, RlfType.ELEMENT_PROTRUSION)
        assert doc is not None and len(doc.answers) == 1

    def test_composed_rules(self):
        q = question(answer_count=2, comment_count=1)
        ans = [
            SoAnswer(id=1, score=5, body="<p>set the width smaller</p>"),
            SoAnswer(id=2, score=-1, body="<p>width width width</p>"),
        ]
        com = [SoComment(id=3, body="try max width instead")]
        doc = filter_and_bundle(q, ans, com, ["width"], RlfType.ELEMENT_COLLISION)
        assert len(doc.answers) == 1
        assert len(doc.comments) == 1

    def test_no_answers_no_comments_discards(self):
        assert (
            filter_and_bundle(question(), [], [], COLLISION_LEXICON, RlfType.ELEMENT_COLLISION)
            is None
        )

    def test_mention_requires_whole_token(self):
        q = question(answer_count=1)
        ans = [SoAnswer(id=1, score=2, body="<p>use margin-right here</p>")]
        doc = filter_and_bundle(q, ans, [], ["margin"], RlfType.ELEMENT_COLLISION)
        assert doc is None

    def test_score_monotone(self):
        q = question(answer_count=1)
        low = [SoAnswer(id=1, score=1, body="<p>width fix</p>")]
        high = [SoAnswer(id=1, score=9, body="<p>width fix</p>")]
        kept_low = filter_and_bundle(q, low, [], ["width"], RlfType.ELEMENT_COLLISION)
        kept_high = filter_and_bundle(q, high, [], ["width"], RlfType.ELEMENT_COLLISION)
        assert kept_low.answers == kept_high.answers


class TestFixtureIngestion:
    def keyword_sets(self):
        return {RlfType.ELEMENT_COLLISION: ["elements overlap"]}

    def lexicons(self):
        return {RlfType.ELEMENT_COLLISION: COLLISION_LEXICON}

    def test_fetch_does_not_filter(self):
        client = FixtureStackExchangeClient(FIXTURE_DIR)
        questions = fetch_questions(
            RlfType.ELEMENT_COLLISION, ["elements overlap"], client
        )
        assert sorted(q.id for q in questions) == [101, 102, 103, 104, 105]

    def test_fetch_deduplicates_across_phrases(self):
        client = FixtureStackExchangeClient(FIXTURE_DIR)
        questions = fetch_questions(
            RlfType.ELEMENT_COLLISION, ["elements overlap", "elements overlap"], client
        )
        assert len(questions) == len({q.id for q in questions})

    def test_build_keeps_two_of_five(self, tmp_path):
        client = FixtureStackExchangeClient(FIXTURE_DIR)
        result = build_kb(client, self.keyword_sets(), self.lexicons(), tmp_path / "kb")
        assert result.complete
        docs = result.store.documents(RlfType.ELEMENT_COLLISION)
        assert [d.doc_id for d in docs] == [101, 104]
        assert result.stats["per_type"]["element_collision"] == {
            "questions": 2,
            "answers": 1,
            "comments": 1,
        }

    def test_build_is_byte_deterministic(self, tmp_path):
        client = FixtureStackExchangeClient(FIXTURE_DIR)
        build_kb(client, self.keyword_sets(), self.lexicons(), tmp_path / "a")
        build_kb(client, self.keyword_sets(), self.lexicons(), tmp_path / "b")
        name = "element_collision.jsonl"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "stats.json").read_bytes() == (
            tmp_path / "b" / "stats.json"
        ).read_bytes()

    def test_store_round_trip_revalidates(self, tmp_path):
        client = FixtureStackExchangeClient(FIXTURE_DIR)
        result = build_kb(client, self.keyword_sets(), self.lexicons(), tmp_path / "kb")
        loaded = KbStore.load(tmp_path / "kb")
        assert [d.to_json() for d in loaded.documents(RlfType.ELEMENT_COLLISION)] == [
            d.to_json() for d in result.store.documents(RlfType.ELEMENT_COLLISION)
        ]

    def test_empty_fixture_builds_empty_store(self, tmp_path):
        fixture = tmp_path / "empty"
        fixture.mkdir()
        for name in ("questions.json", "answers.json", "comments.json"):
            (fixture / name).write_text("[]" if name == "questions.json" else "{}")
        client = FixtureStackExchangeClient(fixture)
        result = build_kb(client, self.keyword_sets(), self.lexicons(), tmp_path / "kb")
        assert result.store.total_documents() == 0
        assert result.stats["totals"] == {"questions": 0, "answers": 0, "comments": 0}


def test_question_requires_css_or_html_tag():
    with pytest.raises(Exception):
        question(tags=("javascript",))


class TestKeywordSet:
    def test_valid_set(self):
        from redefix.kb import KeywordSet

        ks = KeywordSet(RlfType.ELEMENT_COLLISION, ("elements collide", "elements overlap"))
        assert len(ks.phrases) == 2

    def test_rejects_empty_and_overlong_phrases(self):
        from redefix.kb import KeywordSet
        from redefix.kb.store import KbError

        with pytest.raises(KbError):
            KeywordSet(RlfType.ELEMENT_COLLISION, ())
        with pytest.raises(KbError):
            KeywordSet(
                RlfType.ELEMENT_COLLISION,
                ("one two three four five six seven",),
            )
        with pytest.raises(KbError):
            KeywordSet(RlfType.ELEMENT_COLLISION, ("Elements Collide",))

    def test_shipped_defaults_are_valid(self):
        from redefix.kb import KeywordSet
        from redefix.kb.defaults import DEFAULT_KEYWORDS

        for rlf_type, phrases in DEFAULT_KEYWORDS.items():
            KeywordSet(rlf_type, tuple(phrases))
