"""Chat-completion client, CSS patch extraction and the majority vote.

Talks to any endpoint speaking the ``{model, messages}`` /
``{choices:[{message:{content}}]}`` JSON contract, with screenshots
attached as base64 PNG image parts. A scripted mock mode replays canned
responses in order and never touches the network, which keeps the whole
repair loop testable offline.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests

from .csspatch import CssPatch, CssRule, CssDeclaration, PatchError, normalized_key, parse_patch_text
from .cssparse import parse_declarations
from .errors import RedefixError
from .prompting import Prompt

log = logging.getLogger(__name__)

API_KEY_ENV = "REDEFIX_LLM_API_KEY"

_FENCE_RE = re.compile(r"```([^\s`]*)[ \t]*\n(.*?)```", re.S)
_PLAIN_GROUP_RE = re.compile(r"([^{}]+)\{([^{}]*)\}")
_SELECTORISH_RE = re.compile(r"[\w.#*>:\[\]()=\"',^$~|\s-]+$")


class LlmError(RedefixError):
    pass


class NoPatchFoundError(LlmError):
    pass


class AllRunsUnparseableError(LlmError):
    pass


class MockScriptExhaustedError(LlmError):
    pass


@dataclass
class LlmConfig:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model_id: str = "mistral-small-3.1-24b"
    max_context_tokens: int = 128000
    temperature: Optional[float] = None  # None passes through provider defaults
    extra_sampling: dict = field(default_factory=dict)
    mock_script: Optional[str] = None
    timeout: float = 120.0
    max_retries: int = 3

    def __post_init__(self):
        if self.max_context_tokens <= 0:
            raise LlmError("max_context_tokens must be positive")


@dataclass(frozen=True)
class PatchCandidate:
    raw_response: str
    patch: CssPatch
    normalized_key: str


class LlmClient:
    """One configured endpoint; values are immutable, calls are stateless
    except for the mock script cursor (scripted order is its contract)."""

    def __init__(self, config: LlmConfig, session: Optional[requests.Session] = None):
        self.config = config
        self._session = session or requests.Session()
        self._mock_responses: Optional[list[str]] = None
        self._mock_cursor = 0
        self.calls_made = 0
        if config.mock_script:
            raw = json.loads(Path(config.mock_script).read_text())
            if not isinstance(raw, list) or not all(isinstance(r, str) for r in raw):
                raise LlmError("mock script must be a JSON array of strings")
            self._mock_responses = raw

    @property
    def is_mock(self) -> bool:
        return self._mock_responses is not None

    def complete(self, prompt: Prompt) -> str:
        if prompt.token_estimate > self.config.max_context_tokens:
            raise LlmError(
                f"prompt estimate {prompt.token_estimate} exceeds context window "
                f"{self.config.max_context_tokens}"
            )
        self.calls_made += 1
        if self._mock_responses is not None:
            if self._mock_cursor >= len(self._mock_responses):
                raise MockScriptExhaustedError(
                    f"mock script exhausted after {self._mock_cursor} responses"
                )
            response = self._mock_responses[self._mock_cursor]
            self._mock_cursor += 1
            return response
        return self._complete_http(prompt)

    def _complete_http(self, prompt: Prompt) -> str:
        content: list[dict] = [{"type": "text", "text": prompt.text}]
        for shot in prompt.images:
            encoded = base64.b64encode(shot.png_bytes).decode("ascii")
            content.append(
                {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{encoded}"}}
            )
        payload = {"model": self.config.model_id, "messages": [{"role": "user", "content": content}]}
        if self.config.temperature is not None:
            payload["temperature"] = self.config.temperature
        payload.update(self.config.extra_sampling)

        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        delay = 1.0
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self._session.post(
                    self.config.endpoint, json=payload, headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                if attempt == self.config.max_retries:
                    raise LlmError(f"transport failure: {exc}") from exc
                time.sleep(delay)
                delay *= 2
                continue
            if resp.status_code == 429:
                retry_after = float(resp.headers.get("Retry-After", delay))
                time.sleep(min(retry_after, 60.0))
                delay *= 2
                continue
            if resp.status_code >= 500:
                if attempt == self.config.max_retries:
                    raise LlmError(f"provider error HTTP {resp.status_code}")
                time.sleep(delay)
                delay *= 2
                continue
            body = resp.json()
            if resp.status_code != 200:
                message = str(body.get("error", body))
                if "context" in message.lower() or "token" in message.lower():
                    raise LlmError(f"provider reported context overflow: {message}")
                raise LlmError(f"HTTP {resp.status_code}: {message}")
            try:
                return body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise LlmError(f"malformed completion payload: {body}") from exc
        raise LlmError("retries exhausted")


def _parse_or_none(text: str) -> Optional[CssPatch]:
    try:
        return parse_patch_text(text)
    except PatchError:
        return None


def _scan_plain_text(response: str) -> Optional[CssPatch]:
    """Last-resort scan for ``selector { declarations }`` groups in prose."""
    rules = []
    for prelude, body in _PLAIN_GROUP_RE.findall(response):
        last_line = prelude.strip().splitlines()[-1] if prelude.strip() else ""
        m = _SELECTORISH_RE.search(last_line)
        selector = m.group(0).strip() if m else ""
        if not selector or selector.startswith("@"):
            continue
        decls = []
        for d in parse_declarations(body):
            try:
                decls.append(CssDeclaration(d.prop, d.value, d.important))
            except PatchError:
                continue
        if decls:
            rules.append(CssRule(selector, tuple(decls)))
    if not rules:
        return None
    return CssPatch(tuple(rules))


def extract_patch(response: str) -> CssPatch:
    """Pull the candidate patch out of a model response.

    Precedence: last ``css``-tagged fence, then the last fence of any tag
    that parses as CSS, then a plain-text scan. Raises
    ``NoPatchFoundError`` when nothing parseable exists.
    """
    fences = _FENCE_RE.findall(response)
    css_fences = [body for tag, body in fences if tag.lower() == "css"]
    for body in reversed(css_fences):
        patch = _parse_or_none(body)
        if patch is not None:
            return patch
    for tag, body in reversed(fences):
        patch = _parse_or_none(body)
        if patch is not None:
            return patch
    patch = _scan_plain_text(response)
    if patch is None:
        raise NoPatchFoundError("response contains no parseable CSS")
    return patch


def majority_patch(client: LlmClient, prompt: Prompt, n: int = 5) -> PatchCandidate:
    """Run the model n times and return the most frequent normalized patch.

    Unparseable runs are excluded; ties break toward the earliest first
    occurrence so a fixed response sequence always yields the same winner.
    """
    if n < 1:
        raise LlmError(f"majority vote needs n >= 1, got {n}")
    candidates: list[PatchCandidate] = []
    for _ in range(n):
        response = client.complete(prompt)
        try:
            patch = extract_patch(response)
        except NoPatchFoundError:
            log.debug("majority run yielded no patch")
            continue
        candidates.append(PatchCandidate(response, patch, normalized_key(patch)))
    if not candidates:
        raise AllRunsUnparseableError(f"all {n} runs yielded no parseable patch")

    counts: dict[str, int] = {}
    for c in candidates:
        counts[c.normalized_key] = counts.get(c.normalized_key, 0) + 1
    best_key = max(
        counts,
        key=lambda k: (counts[k], -next(i for i, c in enumerate(candidates) if c.normalized_key == k)),
    )
    return next(c for c in candidates if c.normalized_key == best_key)
