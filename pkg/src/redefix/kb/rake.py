"""Rapid Automatic Keyword Extraction over short definition texts.

Candidate phrases are maximal runs of non-stopword words between stopwords
and punctuation. Each word scores degree/frequency, where the degree of a
word grows by the full phrase length for every candidate it appears in; a
phrase scores the sum of its word scores.
"""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"[a-z0-9][a-z0-9-]*")
_BOUNDARY_RE = re.compile(r"[^a-z0-9\s-]+")


def _candidate_phrases(text: str, stopwords: set[str]) -> list[tuple[str, ...]]:
    phrases: list[tuple[str, ...]] = []
    for fragment in _BOUNDARY_RE.split(text.lower()):
        current: list[str] = []
        for word in _WORD_RE.findall(fragment):
            if word in stopwords:
                if current:
                    phrases.append(tuple(current))
                    current = []
            else:
                current.append(word)
        if current:
            phrases.append(tuple(current))
    return phrases


def rake_keywords(text: str, stopwords: set[str]) -> list[tuple[str, float]]:
    """Ranked (phrase, score) pairs, descending score, ties by first
    occurrence. Empty text yields an empty list."""
    phrases = _candidate_phrases(text, stopwords)
    if not phrases:
        return []

    freq: dict[str, int] = {}
    degree: dict[str, int] = {}
    for phrase in phrases:
        for word in phrase:
            freq[word] = freq.get(word, 0) + 1
            degree[word] = degree.get(word, 0) + len(phrase)

    word_score = {w: degree[w] / freq[w] for w in freq}

    seen: dict[str, float] = {}
    order: list[str] = []
    for phrase in phrases:
        key = " ".join(phrase)
        if key not in seen:
            seen[key] = sum(word_score[w] for w in phrase)
            order.append(key)

    ranked = sorted(order, key=lambda k: (-seen[k], order.index(k)))
    return [(k, seen[k]) for k in ranked]
