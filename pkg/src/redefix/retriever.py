"""Hybrid retrieval over a per-failure-type knowledge base.

Okapi BM25 lexical ranking and dense cosine ranking are fused with weighted
reciprocal rank: ``fused(d) = sum_i weight_i / (60 + rank_i(d))``, a missing
rank contributing nothing. Rank-based fusion is scale-free, which sidesteps
the incomparable magnitudes of BM25 scores and cosine similarities.

The default embedder hashes tokens into signed buckets of a fixed-dimension
vector and L2-normalizes, so the whole pipeline runs offline and
deterministically; a remote HTTP provider can be configured instead.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import requests

from .errors import RedefixError
from .kb.store import KbDocument, KbStore
from .layout_model import RlfType
from .tokenization import tokenize

__all__ = [
    "tokenize",
    "Bm25Index",
    "EmbeddingVector",
    "HashingEmbedder",
    "RemoteEmbedder",
    "EnsembleWeights",
    "RankedResult",
    "KbIndex",
    "ensemble_rank",
    "retrieve_context",
    "RRF_C",
]

log = logging.getLogger(__name__)

RRF_C = 60
DEFAULT_TOP_K = 5
DEFAULT_DIMENSION = 256


class RetrievalError(RedefixError):
    pass


@dataclass(frozen=True)
class EnsembleWeights:
    bm25_weight: float = 0.8
    dense_weight: float = 0.2

    def __post_init__(self):
        if self.bm25_weight < 0 or self.dense_weight < 0:
            raise RetrievalError("ensemble weights must be non-negative")
        if self.bm25_weight + self.dense_weight <= 0:
            raise RetrievalError("ensemble weights must not both be zero")


@dataclass(frozen=True)
class RankedResult:
    doc_id: int
    fused_score: float
    bm25_rank: Optional[int] = None
    dense_rank: Optional[int] = None

    def __post_init__(self):
        if self.bm25_rank is None and self.dense_rank is None:
            raise RetrievalError("ranked result carries neither rank")


class Bm25Index:
    """Okapi BM25 with ``idf = ln(1 + (N - df + 0.5) / (df + 0.5))``."""

    def __init__(self, docs: Sequence[tuple[int, str]], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.doc_term_freqs: dict[int, dict[str, int]] = {}
        self.doc_lengths: dict[int, int] = {}
        self.doc_freqs: dict[str, int] = {}
        for doc_id, text in docs:
            tokens = tokenize(text)
            freqs: dict[str, int] = {}
            for t in tokens:
                freqs[t] = freqs.get(t, 0) + 1
            self.doc_term_freqs[doc_id] = freqs
            self.doc_lengths[doc_id] = len(tokens)
            for t in freqs:
                self.doc_freqs[t] = self.doc_freqs.get(t, 0) + 1
        n = len(self.doc_lengths)
        self.avg_doc_length = (sum(self.doc_lengths.values()) / n) if n else 0.0

    def idf(self, term: str) -> float:
        df = self.doc_freqs.get(term, 0)
        if df == 0:
            return 0.0
        n = len(self.doc_lengths)
        return math.log(1 + (n - df + 0.5) / (df + 0.5))

    def score(self, query_tokens: Sequence[str], doc_id: int) -> float:
        """Score one document; repeated query tokens contribute repeatedly."""
        if doc_id not in self.doc_term_freqs:
            raise RetrievalError(f"unknown document id {doc_id}")
        freqs = self.doc_term_freqs[doc_id]
        length = self.doc_lengths[doc_id]
        norm = self.k1 * (1 - self.b + self.b * length / self.avg_doc_length) if self.avg_doc_length else self.k1
        total = 0.0
        for term in query_tokens:
            tf = freqs.get(term, 0)
            if tf == 0:
                continue
            total += self.idf(term) * tf * (self.k1 + 1) / (tf + norm)
        return total

    def ranking(self, query_tokens: Sequence[str]) -> list[tuple[int, float]]:
        """Positive-scoring documents, best first, ties by ascending id."""
        scored = [
            (doc_id, self.score(query_tokens, doc_id)) for doc_id in self.doc_term_freqs
        ]
        scored = [(d, s) for d, s in scored if s > 0]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    norm: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "EmbeddingVector":
        norm = math.sqrt(sum(v * v for v in values))
        if norm > 0:
            values = tuple(v / norm for v in values)
            norm = 1.0
        else:
            values = tuple(values)
        return cls(values=values, norm=norm)

    def cosine(self, other: "EmbeddingVector") -> float:
        if self.norm == 0 or other.norm == 0:
            return 0.0
        return sum(a * b for a, b in zip(self.values, other.values))


class HashingEmbedder:
    """Deterministic bag-of-tokens feature hashing into signed buckets."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension

    def embed(self, text: str) -> EmbeddingVector:
        acc = [0.0] * self.dimension
        for token in tokenize(text):
            digest = hashlib.md5(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dimension
            sign = 1.0 if digest[8] & 1 else -1.0
            acc[bucket] += sign
        return EmbeddingVector.from_values(acc)


class RemoteEmbedder:
    """HTTP embedding provider: ``{input: [text]} -> {vectors: [[float]]}``."""

    def __init__(self, endpoint: str, dimension: int, fallback: Optional[HashingEmbedder] = None,
                 session: Optional[requests.Session] = None, timeout: float = 30.0):
        self.endpoint = endpoint
        self.dimension = dimension
        self.fallback = fallback
        self._session = session or requests.Session()
        self.timeout = timeout

    def embed(self, text: str) -> EmbeddingVector:
        try:
            resp = self._session.post(self.endpoint, json={"input": [text]}, timeout=self.timeout)
            resp.raise_for_status()
            vector = resp.json()["vectors"][0]
            if len(vector) != self.dimension:
                raise RetrievalError(
                    f"embedding dimension mismatch: got {len(vector)}, want {self.dimension}"
                )
            return EmbeddingVector.from_values(vector)
        except (requests.RequestException, KeyError, IndexError) as exc:
            if self.fallback is not None:
                log.warning("remote embedder failed (%s); using hashing fallback", exc)
                return self.fallback.embed(text)
            raise RetrievalError(f"remote embedding failed: {exc}") from exc


class KbIndex:
    """Both retrieval indices over one failure type's documents."""

    def __init__(self, documents: Sequence[KbDocument], embedder=None,
                 k1: float = 1.2, b: float = 0.75):
        self.documents = {d.doc_id: d for d in documents}
        self.embedder = embedder or HashingEmbedder()
        self.bm25 = Bm25Index([(d.doc_id, d.full_text()) for d in documents], k1=k1, b=b)
        self.vectors = {d.doc_id: self.embedder.embed(d.full_text()) for d in documents}

    def dense_ranking(self, query: str) -> list[tuple[int, float]]:
        qv = self.embedder.embed(query)
        if qv.norm == 0:
            return []
        scored = [
            (doc_id, vec.cosine(qv))
            for doc_id, vec in self.vectors.items()
            if vec.norm > 0
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored

    def rank(self, query: str, weights: EnsembleWeights, k: int) -> list[RankedResult]:
        if k < 1:
            raise RetrievalError(f"k must be >= 1, got {k}")
        bm25_ranks = {
            doc_id: rank
            for rank, (doc_id, _) in enumerate(self.bm25.ranking(tokenize(query)), start=1)
        }
        dense_ranks = {
            doc_id: rank for rank, (doc_id, _) in enumerate(self.dense_ranking(query), start=1)
        }
        results = []
        for doc_id in sorted(set(bm25_ranks) | set(dense_ranks)):
            fused = 0.0
            if doc_id in bm25_ranks:
                fused += weights.bm25_weight / (RRF_C + bm25_ranks[doc_id])
            if doc_id in dense_ranks:
                fused += weights.dense_weight / (RRF_C + dense_ranks[doc_id])
            results.append(
                RankedResult(
                    doc_id=doc_id,
                    fused_score=fused,
                    bm25_rank=bm25_ranks.get(doc_id),
                    dense_rank=dense_ranks.get(doc_id),
                )
            )
        results.sort(key=lambda r: (-r.fused_score, r.doc_id))
        return results[:k]


def ensemble_rank(
    query: str,
    documents: Sequence[KbDocument],
    weights: EnsembleWeights = EnsembleWeights(),
    k: int = DEFAULT_TOP_K,
    embedder=None,
) -> list[RankedResult]:
    if not documents:
        return []
    return KbIndex(documents, embedder=embedder).rank(query, weights, k)


def retrieve_context(
    properties: Sequence[str],
    rlf_type: RlfType,
    store: KbStore,
    weights: EnsembleWeights = EnsembleWeights(),
    k: int = DEFAULT_TOP_K,
    embedder=None,
) -> list[KbDocument]:
    """Top documents for the problematic properties, in fused order.

    The query is the property names joined by spaces, run against the
    failure type's own document set.
    """
    if not properties:
        raise RetrievalError("no properties to query with")
    query = " ".join(properties)
    documents = store.documents(rlf_type)
    if not documents:
        return []
    index = KbIndex(documents, embedder=embedder)
    ranked = index.rank(query, weights, k)
    return [index.documents[r.doc_id] for r in ranked]
