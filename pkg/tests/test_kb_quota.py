"""Quota-exhaustion contracts for ingestion and the kb build command."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

import redefix.cli
from redefix.cli import main
from redefix.kb import QuotaExhaustedError, build_kb, fetch_questions
from redefix.kb.defaults import DEFAULT_PROPERTY_LEXICONS
from redefix.layout_model import RlfType

QUESTION = {
    "question_id": 501,
    "link": "https://stackoverflow.com/q/501",
    "title": "Elements overlap",
    "body": "<p>elements overlap</p>",
    "score": 1,
    "tags": ["css"],
    "answer_count": 1,
    "comment_count": 0,
}


class QuotaAfterFirstPhraseClient:
    """Serves the first phrase, then reports an exhausted quota."""

    def __init__(self):
        self.phrases_seen = []

    def search_questions(self, phrase, tagged):
        if phrase not in self.phrases_seen:
            self.phrases_seen.append(phrase)
        if len(self.phrases_seen) > 1:
            raise QuotaExhaustedError("quota gone", retry_after=60)
        return [QUESTION] if tagged == "css" else []

    def answers_for(self, question_id):
        return [{"answer_id": 1, "score": 2, "body": "<p>use margin</p>"}]

    def comments_for_answers(self, answer_ids):
        return []


def test_fetch_questions_carries_partial_state():
    client = QuotaAfterFirstPhraseClient()
    with pytest.raises(QuotaExhaustedError) as exc_info:
        fetch_questions(RlfType.ELEMENT_COLLISION, ["first phrase", "second phrase"], client)
    err = exc_info.value
    assert err.completed_phrases == ["first phrase"]
    assert [q.id for q in err.partial_questions] == [501]
    assert err.retry_after == 60


def test_build_kb_flags_partial_store(tmp_path):
    client = QuotaAfterFirstPhraseClient()
    result = build_kb(
        client,
        {RlfType.ELEMENT_COLLISION: ["first phrase", "second phrase"]},
        {RlfType.ELEMENT_COLLISION: DEFAULT_PROPERTY_LEXICONS[RlfType.ELEMENT_COLLISION]},
        tmp_path / "kb",
    )
    assert not result.complete
    assert result.error is not None
    stats = json.loads((tmp_path / "kb" / "stats.json").read_text())
    assert stats["complete"] is False


def test_cli_kb_build_exits_two_on_quota(tmp_path, monkeypatch):
    monkeypatch.setenv("REDEFIX_SO_API_KEY", "key")
    monkeypatch.setattr(redefix.cli, "StackExchangeClient", QuotaAfterFirstPhraseClient)
    result = CliRunner().invoke(
        main, ["kb", "build", "--kb-path", str(tmp_path / "kb")], catch_exceptions=False
    )
    assert result.exit_code == 2
