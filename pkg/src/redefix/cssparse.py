"""Lenient CSS parsing: rules, declarations, media queries and selectors.

Covers the slice of CSS this toolchain manipulates — plain style rules,
``@media (min-width/max-width)`` blocks and simple selectors (type, ``#id``,
``.class``, ``:nth-child()``, descendant and child combinators). Anything
unparseable is skipped rather than raised; patch extraction depends on
surviving messy LLM output.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .dom import Element

_COMMENT_RE = re.compile(r"/\*.*?\*/", re.S)
_IMPORTANT_RE = re.compile(r"!\s*important\s*$", re.I)
_MEDIA_FEATURE_RE = re.compile(r"\(\s*(min|max)-width\s*:\s*([0-9.]+)px\s*\)", re.I)


def strip_comments(text: str) -> str:
    return _COMMENT_RE.sub("", text)


@dataclass(frozen=True)
class MediaQuery:
    """Width window of a ``@media`` prelude; None bounds are open."""

    min_width: Optional[float] = None
    max_width: Optional[float] = None

    def matches(self, viewport_width: float) -> bool:
        if self.min_width is not None and viewport_width < self.min_width:
            return False
        if self.max_width is not None and viewport_width > self.max_width:
            return False
        return True

    @classmethod
    def parse(cls, prelude: str) -> "MediaQuery":
        lo = hi = None
        for kind, value in _MEDIA_FEATURE_RE.findall(prelude):
            if kind.lower() == "min":
                lo = float(value) if lo is None else max(lo, float(value))
            else:
                hi = float(value) if hi is None else min(hi, float(value))
        return cls(lo, hi)


@dataclass
class Declaration:
    prop: str
    value: str
    important: bool = False


@dataclass
class StyleRule:
    selector: str
    declarations: list[Declaration]
    media: Optional[MediaQuery] = None
    order: int = 0


def parse_declarations(body: str) -> list[Declaration]:
    """Split a declaration block; empty properties or values are dropped."""
    out = []
    for chunk in _split_top_level(body, ";"):
        if ":" not in chunk:
            continue
        prop, _, value = chunk.partition(":")
        prop = prop.strip().lower()
        value = value.strip()
        important = False
        m = _IMPORTANT_RE.search(value)
        if m:
            important = True
            value = value[: m.start()].strip()
        if prop and value:
            out.append(Declaration(prop, value, important))
    return out


def _split_top_level(text: str, sep: str) -> list[str]:
    """Split on ``sep`` outside parentheses, brackets and strings."""
    parts, buf, depth, quote = [], [], 0, None
    for ch in text:
        if quote:
            buf.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "\"'":
            quote = ch
            buf.append(ch)
        elif ch in "([":
            depth += 1
            buf.append(ch)
        elif ch in ")]":
            depth = max(0, depth - 1)
            buf.append(ch)
        elif ch == sep and depth == 0:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    if buf:
        parts.append("".join(buf))
    return [p.strip() for p in parts if p.strip()]


def _iter_blocks(text: str):
    """Yield (prelude, body) pairs for every top-level ``{}`` block."""
    i, n = 0, len(text)
    while i < n:
        brace = text.find("{", i)
        if brace == -1:
            return
        prelude = text[i:brace].strip()
        depth, j = 1, brace + 1
        while j < n and depth:
            if text[j] == "{":
                depth += 1
            elif text[j] == "}":
                depth -= 1
            j += 1
        body = text[brace + 1 : j - 1] if depth == 0 else text[brace + 1 :]
        yield prelude, body
        i = j


def parse_stylesheet(text: str, start_order: int = 0) -> list[StyleRule]:
    """Flatten a stylesheet into per-selector rules in source order.

    ``@media`` blocks are descended one level and their width window is
    attached to each inner rule; other at-rules are ignored.
    """
    rules: list[StyleRule] = []
    order = start_order
    for prelude, body in _iter_blocks(strip_comments(text)):
        if prelude.startswith("@media"):
            mq = MediaQuery.parse(prelude)
            for inner_sel, inner_body in _iter_blocks(body):
                if inner_sel.startswith("@"):
                    continue
                decls = parse_declarations(inner_body)
                for sel in _split_top_level(inner_sel, ","):
                    rules.append(StyleRule(sel, list(decls), mq, order))
                    order += 1
        elif prelude.startswith("@"):
            continue
        else:
            decls = parse_declarations(body)
            for sel in _split_top_level(prelude, ","):
                rules.append(StyleRule(sel, list(decls), None, order))
                order += 1
    return rules


# --- Selector matching -----------------------------------------------------

_SIMPLE_PART_RE = re.compile(
    r"""
    (?P<tag>\*|[a-zA-Z][\w-]*)
  | \#(?P<id>[\w-]+)
  | \.(?P<cls>[\w-]+)
  | :nth-child\(\s*(?P<nth>\d+)\s*\)
  | :(?P<pseudo>[\w-]+)(\([^)]*\))?
""",
    re.X,
)


@dataclass
class SimpleSelector:
    tag: Optional[str] = None
    id: Optional[str] = None
    classes: list[str] = field(default_factory=list)
    nth_child: Optional[int] = None
    unsupported: bool = False

    def matches(self, el: Element) -> bool:
        if self.unsupported:
            return False
        if self.tag and self.tag != "*" and el.tag != self.tag:
            return False
        if self.id is not None and el.id != self.id:
            return False
        for c in self.classes:
            if c not in el.classes:
                return False
        if self.nth_child is not None and el.sibling_position() != self.nth_child:
            return False
        return True


@dataclass
class CompoundSelector:
    """A chain of simple selectors joined by descendant/child combinators."""

    parts: list[tuple[str, SimpleSelector]]  # combinator "" | ">" | " "

    def matches(self, el: Element) -> bool:
        return self._match_from(el, len(self.parts) - 1)

    def _match_from(self, el: Element, idx: int) -> bool:
        comb, simple = self.parts[idx]
        if not simple.matches(el):
            return False
        if idx == 0:
            return True
        if comb == ">":
            return el.parent is not None and self._match_from(el.parent, idx - 1)
        for anc in el.ancestors():
            if self._match_from(anc, idx - 1):
                return True
        return False

    def specificity(self) -> tuple[int, int, int]:
        ids = classes = types = 0
        for _, s in self.parts:
            if s.id:
                ids += 1
            classes += len(s.classes)
            if s.nth_child is not None:
                classes += 1
            if s.tag and s.tag != "*":
                types += 1
        return (ids, classes, types)


def _parse_simple(token: str) -> SimpleSelector:
    simple = SimpleSelector()
    pos = 0
    while pos < len(token):
        m = _SIMPLE_PART_RE.match(token, pos)
        if not m:
            simple.unsupported = True
            return simple
        if m.group("tag"):
            simple.tag = m.group("tag").lower()
        elif m.group("id"):
            simple.id = m.group("id")
        elif m.group("cls"):
            simple.classes.append(m.group("cls"))
        elif m.group("nth"):
            simple.nth_child = int(m.group("nth"))
        else:
            # Unknown pseudo-class: treat the whole selector as non-matching
            # rather than silently over-matching.
            simple.unsupported = True
        pos = m.end()
    return simple


def parse_selector(text: str) -> Optional[CompoundSelector]:
    tokens = re.split(r"(\s*>\s*|\s+)", text.strip())
    parts: list[tuple[str, SimpleSelector]] = []
    comb = ""
    for tok in tokens:
        if not tok:
            continue
        if tok.strip() == ">":
            comb = ">"
            continue
        if not tok.strip():
            if comb != ">":
                comb = " "
            continue
        parts.append((comb, _parse_simple(tok.strip())))
        comb = ""
    if not parts:
        return None
    return CompoundSelector(parts)


def query_all(root: Element, selector_text: str) -> list[Element]:
    """All elements under ``root`` matching any comma-separated selector."""
    matched: list[Element] = []
    selectors = []
    for sel_text in _split_top_level(selector_text, ","):
        sel = parse_selector(sel_text)
        if sel is not None:
            selectors.append(sel)
    for el in root.iter():
        if any(s.matches(el) for s in selectors):
            matched.append(el)
    return matched
