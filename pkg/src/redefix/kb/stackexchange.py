"""Stack Exchange API v2.x client plus an offline fixture twin.

The live client paginates ``search/advanced``, fetches answers per question
and comments per answer batch, honors the API's ``backoff`` field, keeps
under a request-rate ceiling and retries transient failures with
exponential backoff. The fixture client serves canned JSON files with the
same surface so ingestion is testable offline and deterministically.
"""

from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path

import requests

from ..errors import RedefixError

log = logging.getLogger(__name__)

API_KEY_ENV = "REDEFIX_SO_API_KEY"


class StackExchangeError(RedefixError):
    pass


class QuotaExhaustedError(StackExchangeError):
    """API quota ran out; carries what was completed before the cutoff."""

    def __init__(self, message, retry_after=None, completed_phrases=(), partial_questions=()):
        super().__init__(message)
        self.retry_after = retry_after
        self.completed_phrases = list(completed_phrases)
        self.partial_questions = list(partial_questions)


class StackExchangeClient:
    def __init__(
        self,
        base_url: str = "https://api.stackexchange.com/2.3",
        api_key: str | None = None,
        site: str = "stackoverflow",
        page_size: int = 100,
        max_pages: int = 10,
        max_requests_per_second: float = 25.0,
        max_retries: int = 3,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.site = site
        self.page_size = page_size
        self.max_pages = max_pages
        self.max_retries = max_retries
        self._session = session or requests.Session()
        self._min_interval = 1.0 / max_requests_per_second
        self._next_allowed = 0.0
        self._quota_exhausted = False

    def _get(self, path: str, **params) -> dict:
        if self._quota_exhausted:
            raise QuotaExhaustedError("API quota exhausted")
        params.setdefault("site", self.site)
        if self.api_key:
            params.setdefault("key", self.api_key)

        delay = 1.0
        for attempt in range(self.max_retries + 1):
            wait = self._next_allowed - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._next_allowed = time.monotonic() + self._min_interval
            try:
                resp = self._session.get(f"{self.base_url}/{path}", params=params, timeout=30)
            except requests.RequestException as exc:
                if attempt == self.max_retries:
                    raise StackExchangeError(f"GET {path} failed: {exc}") from exc
                time.sleep(delay)
                delay *= 2
                continue
            if resp.status_code >= 500:
                if attempt == self.max_retries:
                    raise StackExchangeError(f"GET {path}: HTTP {resp.status_code}")
                time.sleep(delay)
                delay *= 2
                continue
            payload = resp.json()
            if payload.get("error_id") == 502:  # throttle_violation
                self._quota_exhausted = True
                raise QuotaExhaustedError(
                    payload.get("error_message", "throttled"),
                    retry_after=payload.get("backoff"),
                )
            if resp.status_code != 200:
                raise StackExchangeError(
                    f"GET {path}: HTTP {resp.status_code}: {payload.get('error_message')}"
                )
            backoff = payload.get("backoff")
            if backoff:
                self._next_allowed = time.monotonic() + float(backoff)
            if payload.get("quota_remaining") == 0:
                self._quota_exhausted = True
            return payload
        raise StackExchangeError(f"GET {path}: retries exhausted")

    def _paginate(self, path: str, **params) -> list[dict]:
        items: list[dict] = []
        for page in range(1, self.max_pages + 1):
            payload = self._get(path, page=page, pagesize=self.page_size, **params)
            items.extend(payload.get("items", []))
            if not payload.get("has_more"):
                break
        return items

    def search_questions(self, phrase: str, tagged: str) -> list[dict]:
        return self._paginate(
            "search/advanced",
            q=phrase,
            tagged=tagged,
            filter="withbody",
            order="desc",
            sort="relevance",
        )

    def answers_for(self, question_id: int) -> list[dict]:
        return self._paginate(f"questions/{question_id}/answers", filter="withbody")

    def comments_for_answers(self, answer_ids: list[int]) -> list[dict]:
        if not answer_ids:
            return []
        out: list[dict] = []
        # The ids path segment is capped; chunk conservatively.
        for i in range(0, len(answer_ids), 100):
            chunk = ";".join(str(a) for a in answer_ids[i : i + 100])
            out.extend(self._paginate(f"answers/{chunk}/comments", filter="withbody"))
        return out


class FixtureStackExchangeClient:
    """Serves canned API payloads from a directory.

    Expects ``questions.json`` (list of question objects),
    ``answers.json`` (question id -> list of answer objects) and
    ``comments.json`` (answer id -> list of comment objects).
    """

    def __init__(self, fixture_dir: str | Path):
        root = Path(fixture_dir)
        if not root.is_dir():
            raise StackExchangeError(f"fixture directory not found: {root}")
        self._questions = json.loads((root / "questions.json").read_text())
        self._answers = json.loads((root / "answers.json").read_text())
        self._comments = json.loads((root / "comments.json").read_text())

    def search_questions(self, phrase: str, tagged: str) -> list[dict]:
        words = set(phrase.lower().split())
        hits = []
        for q in self._questions:
            if tagged not in q.get("tags", []):
                continue
            text = (q.get("title", "") + " " + q.get("body", "")).lower()
            if all(w in text for w in words):
                hits.append(q)
        return hits

    def answers_for(self, question_id: int) -> list[dict]:
        return self._answers.get(str(question_id), [])

    def comments_for_answers(self, answer_ids: list[int]) -> list[dict]:
        out = []
        for aid in answer_ids:
            out.extend(self._comments.get(str(aid), []))
        return out
