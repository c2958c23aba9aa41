import json

import pytest

from redefix.csspatch import CssDeclaration
from redefix.llm import (
    AllRunsUnparseableError,
    LlmClient,
    LlmConfig,
    LlmError,
    MockScriptExhaustedError,
    NoPatchFoundError,
    extract_patch,
    majority_patch,
)
from redefix.prompting import Prompt


def tiny_prompt(tokens=10):
    return Prompt(
        sections=(("role", "r"), ("task", "t"), ("context", "c"), ("so_posts", ""), ("cot", "x")),
        token_estimate=tokens,
        budget=100000,
    )


def mock_client(tmp_path, responses, **cfg):
    script = tmp_path / "script.json"
    script.write_text(json.dumps(responses))
    return LlmClient(LlmConfig(mock_script=str(script), **cfg))


class ExplodingSession:
    """Fails the test if any network call is attempted."""

    def __init__(self):
        self.calls = 0

    def post(self, *a, **k):
        self.calls += 1
        raise AssertionError("network access in mock mode")


class TestComplete:
    def test_scripted_sequence(self, tmp_path):
        client = mock_client(tmp_path, ["resp1", "resp2"])
        assert client.complete(tiny_prompt()) == "resp1"
        assert client.complete(tiny_prompt()) == "resp2"

    def test_script_exhaustion(self, tmp_path):
        client = mock_client(tmp_path, ["only"])
        client.complete(tiny_prompt())
        with pytest.raises(MockScriptExhaustedError):
            client.complete(tiny_prompt())

    def test_oversized_prompt_fails_before_any_call(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text(json.dumps(["resp"]))
        session = ExplodingSession()
        client = LlmClient(
            LlmConfig(mock_script=str(script), max_context_tokens=100), session=session
        )
        with pytest.raises(LlmError):
            client.complete(tiny_prompt(tokens=101))
        assert session.calls == 0

    def test_mock_mode_never_touches_network(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text(json.dumps(["a", "b"]))
        session = ExplodingSession()
        client = LlmClient(
            LlmConfig(mock_script=str(script), endpoint="http://sentinel.invalid"),
            session=session,
        )
        client.complete(tiny_prompt())
        client.complete(tiny_prompt())
        assert session.calls == 0


GOOD = "Reasoning here.\n```css\n.a { width: 50%; }\n```\n"


class TestExtractPatch:
    def test_single_fenced_block(self):
        patch = extract_patch(GOOD)
        assert patch.rules[0].selector == ".a"
        assert patch.rules[0].declarations == (CssDeclaration("width", "50%"),)

    def test_pure_prose_raises(self):
        with pytest.raises(NoPatchFoundError):
            extract_patch("I am unable to produce a patch, sorry.")

    def test_last_css_block_wins(self):
        response = (
            "First try:\n```css\n.a { width: 10px; }\n```\n"
            "Actually, better:\n```css\n.a { width: 20px; }\n```\n"
        )
        patch = extract_patch(response)
        assert patch.rules[0].declarations[0].value == "20px"

    def test_untagged_fence_parsing_as_css(self):
        patch = extract_patch("```\n#x { margin: 0; }\n```")
        assert patch.rules[0].selector == "#x"

    def test_plain_text_group_scan(self):
        patch = extract_patch("Apply this somewhere:\n.banner { max-width: 100%; }")
        assert patch.rules[0].selector == ".banner"

    def test_media_wrapped_plain_text(self):
        patch = extract_patch("@media (max-width: 700px) { .a { width: 50px; } }")
        assert patch.rules[0].selector == ".a"

    def test_empty_patch_never_returned(self):
        with pytest.raises(NoPatchFoundError):
            extract_patch("```css\n.a { }\n```")


class TestMajorityPatch:
    A = "```css\n.a { width: 50%; }\n```"
    B = "```css\n.a { width: 60%; }\n```"
    C = "```css\n.b { margin: 0; }\n```"

    def test_mode_wins(self, tmp_path):
        client = mock_client(tmp_path, [self.A, self.B, self.A, self.A, self.C])
        winner = majority_patch(client, tiny_prompt(), n=5)
        assert winner.patch.rules[0].declarations[0].value == "50%"
        assert client.calls_made == 5

    def test_tie_breaks_to_first_occurrence(self, tmp_path):
        client = mock_client(tmp_path, [self.A, self.B])
        winner = majority_patch(client, tiny_prompt(), n=2)
        assert winner.patch.rules[0].declarations[0].value == "50%"

    def test_shuffled_declarations_share_a_key(self, tmp_path):
        one = "```css\n.a { width: 50%; margin: 0; }\n```"
        two = "```css\n.a { margin: 0; width: 50%; }\n```"
        client = mock_client(tmp_path, [one, two])
        winner = majority_patch(client, tiny_prompt(), n=2)
        responses = [one, two]
        assert winner.raw_response == responses[0]

    def test_unparseable_runs_excluded(self, tmp_path):
        client = mock_client(tmp_path, ["no patch here", self.B, self.B])
        winner = majority_patch(client, tiny_prompt(), n=3)
        assert winner.patch.rules[0].declarations[0].value == "60%"

    def test_all_unparseable_raises(self, tmp_path):
        client = mock_client(tmp_path, ["nope", "still nope"])
        with pytest.raises(AllRunsUnparseableError):
            majority_patch(client, tiny_prompt(), n=2)

    def test_permutation_invariance_of_winner_key(self, tmp_path):
        base = [self.A, self.B, self.A, self.C, self.A]
        permuted = [self.C, self.A, self.A, self.B, self.A]
        w1 = majority_patch(mock_client(tmp_path, base), tiny_prompt(), n=5)
        w2 = majority_patch(
            LlmClient(LlmConfig(mock_script=_write(tmp_path, "p2.json", permuted))),
            tiny_prompt(),
            n=5,
        )
        assert w1.normalized_key == w2.normalized_key


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)
