"""Knowledge-base documents, filtering rules and the persisted store.

One JSONL file per failure type under a kb directory plus ``stats.json``
with question/answer/comment counts. Building is deterministic for a fixed
client: documents are ordered by question id and serialization is stable.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import RedefixError
from ..layout_model import RlfType
from ..tokenization import tokenize
from .clean import clean_html
from .stackexchange import QuotaExhaustedError

log = logging.getLogger(__name__)

_CODE_SPAN_RE = re.compile(r"<code>.*?</code>", re.S)


class KbError(RedefixError):
    pass


@dataclass(frozen=True)
class KeywordSet:
    """Search phrases for one failure type; phrases are lowercase and one
    to six words long."""

    rlf_type: RlfType
    phrases: tuple[str, ...]

    def __post_init__(self):
        if not self.phrases:
            raise KbError(f"empty keyword set for {self.rlf_type.value}")
        for phrase in self.phrases:
            words = phrase.split()
            if not 1 <= len(words) <= 6:
                raise KbError(f"keyword phrase must be 1-6 words: {phrase!r}")
            if phrase != phrase.lower():
                raise KbError(f"keyword phrase must be lowercase: {phrase!r}")


@dataclass(frozen=True)
class SoQuestion:
    id: int
    link: str
    title: str
    body: str
    score: int
    tags: tuple[str, ...]
    answer_count: int
    comment_count: int

    def __post_init__(self):
        if self.id <= 0:
            raise KbError(f"bad question id {self.id}")
        if "css" not in self.tags and "html" not in self.tags:
            raise KbError(f"question {self.id} missing css/html tag")

    @classmethod
    def from_api(cls, d: dict) -> "SoQuestion":
        return cls(
            id=int(d["question_id"]),
            link=d.get("link", ""),
            title=d.get("title", ""),
            body=d.get("body", ""),
            score=int(d.get("score", 0)),
            tags=tuple(d.get("tags", [])),
            answer_count=int(d.get("answer_count", 0)),
            comment_count=int(d.get("comment_count", 0)),
        )


@dataclass(frozen=True)
class SoAnswer:
    id: int
    score: int
    body: str

    @classmethod
    def from_api(cls, d: dict) -> "SoAnswer":
        return cls(id=int(d["answer_id"]), score=int(d.get("score", 0)), body=d.get("body", ""))


@dataclass(frozen=True)
class SoComment:
    id: int
    body: str

    def __post_init__(self):
        if not self.body:
            raise KbError(f"comment {self.id} has empty body")

    @classmethod
    def from_api(cls, d: dict) -> "SoComment":
        return cls(id=int(d["comment_id"]), body=d.get("body", ""))


@dataclass
class KbDocument:
    rlf_type: RlfType
    metadata: dict
    cleaned_question: str
    answers: list[str] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)

    def validate(self) -> None:
        for key in ("ID", "LINK", "TITLE", "BODY"):
            if key not in self.metadata:
                raise KbError(f"document missing metadata field {key}")
        if not self.answers and not self.comments:
            raise KbError(f"document {self.metadata.get('ID')} has no answers or comments")
        for text in [self.cleaned_question, *self.answers, *self.comments]:
            if "<" in _CODE_SPAN_RE.sub("", text):
                raise KbError(f"residual markup in cleaned text of {self.metadata.get('ID')}")

    @property
    def doc_id(self) -> int:
        return int(self.metadata["ID"])

    def full_text(self) -> str:
        """Retrieval unit: title, body, answers and comments concatenated."""
        return "\n".join(
            [str(self.metadata.get("TITLE", "")), self.cleaned_question]
            + self.answers
            + self.comments
        )

    def to_json(self) -> dict:
        return {
            "rlf_type": self.rlf_type.value,
            "metadata": self.metadata,
            "cleaned_question": self.cleaned_question,
            "answers": self.answers,
            "comments": self.comments,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KbDocument":
        doc = cls(
            rlf_type=RlfType(obj["rlf_type"]),
            metadata=dict(obj["metadata"]),
            cleaned_question=obj["cleaned_question"],
            answers=list(obj["answers"]),
            comments=list(obj["comments"]),
        )
        doc.validate()
        return doc


def _mentions_any(text: str, lexicon: set[str]) -> bool:
    return bool(set(tokenize(text)) & lexicon)


def filter_and_bundle(
    question: SoQuestion,
    answers: list[SoAnswer],
    comments: list[SoComment],
    property_lexicon: list[str],
    rlf_type: RlfType,
) -> KbDocument | None:
    """Apply the relevance rules and clean surviving texts.

    Questions with neither answers nor comments are discarded; answers with
    score <= 0 are treated as unverified and dropped; surviving answers and
    comments must mention at least one lexicon property; a question whose
    items were all dropped is discarded.
    """
    if not answers and not comments:
        return None
    lexicon = {p.lower() for p in property_lexicon}

    kept_answers = []
    for answer in answers:
        if answer.score <= 0:
            continue
        text = clean_html(answer.body)
        if _mentions_any(text, lexicon):
            kept_answers.append(text)

    kept_comments = []
    for comment in comments:
        text = clean_html(comment.body)
        if text and _mentions_any(text, lexicon):
            kept_comments.append(text)

    if not kept_answers and not kept_comments:
        return None

    return KbDocument(
        rlf_type=rlf_type,
        metadata={
            "ID": question.id,
            "LINK": question.link,
            "TITLE": question.title,
            "BODY": question.body,
        },
        cleaned_question=clean_html(question.body),
        answers=kept_answers,
        comments=kept_comments,
    )


def fetch_questions(
    rlf_type: RlfType, keywords: KeywordSet | list[str], client
) -> list[SoQuestion]:
    """Search once per phrase under each of the css and html tags.

    The search endpoint ANDs multiple tags, so OR semantics come from two
    tag-restricted passes. Results are de-duplicated by question id.
    """
    if not isinstance(keywords, KeywordSet):
        keywords = KeywordSet(rlf_type, tuple(keywords))
    seen: dict[int, SoQuestion] = {}
    completed: list[str] = []
    for phrase in keywords.phrases:
        try:
            for tag in ("css", "html"):
                for item in client.search_questions(phrase, tagged=tag):
                    q = SoQuestion.from_api(item)
                    seen.setdefault(q.id, q)
        except QuotaExhaustedError as exc:
            raise QuotaExhaustedError(
                f"quota exhausted during {rlf_type.value} ingestion: {exc}",
                retry_after=exc.retry_after,
                completed_phrases=completed,
                partial_questions=list(seen.values()),
            ) from exc
        completed.append(phrase)
    return list(seen.values())


@dataclass
class KbBuildResult:
    store: "KbStore"
    stats: dict
    complete: bool
    error: Exception | None = None


class KbStore:
    """Immutable per-type document sets, persisted as JSONL files."""

    def __init__(self, documents: dict[RlfType, list[KbDocument]]):
        self._docs = documents

    def types(self) -> list[RlfType]:
        return sorted(self._docs, key=lambda t: t.order)

    def documents(self, rlf_type: RlfType) -> list[KbDocument]:
        return list(self._docs.get(rlf_type, []))

    def total_documents(self) -> int:
        return sum(len(v) for v in self._docs.values())

    @staticmethod
    def path_for(kb_dir: str | Path, rlf_type: RlfType) -> Path:
        return Path(kb_dir) / f"{rlf_type.value}.jsonl"

    @classmethod
    def load(cls, kb_dir: str | Path) -> "KbStore":
        root = Path(kb_dir)
        if not root.is_dir():
            raise KbError(f"kb directory not found: {root}")
        docs: dict[RlfType, list[KbDocument]] = {}
        for rlf_type in RlfType:
            path = cls.path_for(root, rlf_type)
            if not path.exists():
                continue
            with path.open() as fh:
                docs[rlf_type] = [
                    KbDocument.from_json(json.loads(line)) for line in fh if line.strip()
                ]
        return cls(docs)

    def save(self, kb_dir: str | Path) -> None:
        root = Path(kb_dir)
        root.mkdir(parents=True, exist_ok=True)
        for rlf_type, documents in self._docs.items():
            path = self.path_for(root, rlf_type)
            with path.open("w") as fh:
                for doc in sorted(documents, key=lambda d: d.doc_id):
                    fh.write(json.dumps(doc.to_json(), sort_keys=True) + "\n")


def build_kb(
    client,
    keyword_sets: dict[RlfType, list[str]],
    property_lexicons: dict[RlfType, list[str]],
    kb_dir: str | Path,
) -> KbBuildResult:
    """Ingest, filter and persist the knowledge base.

    On quota exhaustion the partial store is persisted and flagged
    incomplete rather than thrown away.
    """
    docs: dict[RlfType, list[KbDocument]] = {}
    stats: dict = {"schema_version": 1, "per_type": {}, "complete": True}
    error: Exception | None = None

    for rlf_type in sorted(keyword_sets, key=lambda t: t.order):
        phrases = keyword_sets[rlf_type]
        lexicon = property_lexicons.get(rlf_type, [])
        kept: list[KbDocument] = []
        n_answers = n_comments = 0
        try:
            questions = fetch_questions(rlf_type, phrases, client)
            for question in sorted(questions, key=lambda q: q.id):
                answers = [SoAnswer.from_api(a) for a in client.answers_for(question.id)]
                comments = [
                    SoComment.from_api(c)
                    for c in client.comments_for_answers([a.id for a in answers])
                    if c.get("body")
                ]
                doc = filter_and_bundle(question, answers, comments, lexicon, rlf_type)
                if doc is not None:
                    kept.append(doc)
                    n_answers += len(doc.answers)
                    n_comments += len(doc.comments)
        except QuotaExhaustedError as exc:
            log.warning("kb build interrupted by quota: %s", exc)
            stats["complete"] = False
            error = exc
        docs[rlf_type] = kept
        stats["per_type"][rlf_type.value] = {
            "questions": len(kept),
            "answers": n_answers,
            "comments": n_comments,
        }
        if error is not None:
            break

    stats["totals"] = {
        key: sum(t[key] for t in stats["per_type"].values())
        for key in ("questions", "answers", "comments")
    }

    store = KbStore(docs)
    store.save(kb_dir)
    stats_path = Path(kb_dir) / "stats.json"
    stats_path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return KbBuildResult(store=store, stats=stats, complete=stats["complete"], error=error)
