"""CSS patch model: parsing, media scoping, selector targeting, serialization.

Candidate patches arrive as loose CSS text, get re-targeted onto concrete
elements, wrapped in a media rule covering the failure range with every
declaration forced ``!important``, and serialized in one bit-exact format so
identical patches always produce identical bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from . import cssparse
from .dom import Document
from .errors import RedefixError
from .layout_model import LayoutSnapshot

PROPERTY_RE = re.compile(r"^[a-z-]+$")


class PatchError(RedefixError):
    pass


class SelectorError(RedefixError):
    pass


@dataclass(frozen=True)
class CssDeclaration:
    property: str
    value: str
    important: bool = False

    def __post_init__(self):
        if not self.value:
            raise PatchError("empty declaration value")
        if not PROPERTY_RE.match(self.property):
            raise PatchError(f"malformed property name {self.property!r}")


@dataclass(frozen=True)
class CssRule:
    selector: str
    declarations: tuple[CssDeclaration, ...]

    def __post_init__(self):
        if not self.declarations:
            raise PatchError(f"rule {self.selector!r} has no declarations")


@dataclass(frozen=True)
class CssPatch:
    rules: tuple[CssRule, ...]

    def __post_init__(self):
        if not self.rules:
            raise PatchError("patch has no rules")

    def to_css(self) -> str:
        """Canonical unscoped form, used when embedding a failed patch in
        a retry prompt."""
        out = []
        for rule in self.rules:
            out.append(f"{rule.selector} {{\n")
            for d in rule.declarations:
                bang = " !important" if d.important else ""
                out.append(f"  {d.property}: {d.value}{bang};\n")
            out.append("}\n")
        return "".join(out)


@dataclass(frozen=True)
class MediaScopedPatch:
    min_width: int
    max_width: int
    patch: CssPatch

    def __post_init__(self):
        if self.min_width > self.max_width:
            raise PatchError(f"inverted media range {self.min_width}..{self.max_width}")
        for rule in self.patch.rules:
            for d in rule.declarations:
                if not d.important:
                    raise PatchError("scoped patch declaration missing !important")


def parse_patch_text(text: str) -> CssPatch:
    """Parse loose CSS into a patch; raises ``PatchError`` when nothing
    usable is found.

    ``@media`` wrappers are unwrapped (the repair loop re-scopes patches to
    the detected failure range itself); declarations with empty property or
    value are dropped, as are rules left with no declarations.
    """
    rules = []
    for parsed in cssparse.parse_stylesheet(text):
        decls = []
        for d in parsed.declarations:
            try:
                decls.append(CssDeclaration(d.prop, d.value, d.important))
            except PatchError:
                continue
        if decls and parsed.selector and not parsed.selector.startswith("@"):
            rules.append(CssRule(parsed.selector, tuple(decls)))
    if not rules:
        raise PatchError("no CSS rules found")
    return CssPatch(tuple(rules))


def compact_css(patch: CssPatch) -> str:
    """Single-line canonical form, used when a failed patch is embedded in
    retry prompt text."""
    rules = []
    for rule in patch.rules:
        decls = "; ".join(
            f"{d.property}: {d.value}" + (" !important" if d.important else "")
            for d in rule.declarations
        )
        rules.append(f"{rule.selector} {{ {decls} }}")
    return " ".join(rules)


def normalized_key(patch: CssPatch) -> str:
    """Canonical identity of a patch for majority voting.

    Lowercases property names, strips whitespace runs inside values, sorts
    declarations within each rule by property and rules by selector, so
    formatting and ordering differences between LLM samples collapse.
    """
    rules = []
    for rule in patch.rules:
        sel = " ".join(rule.selector.split())
        decls = sorted(
            (d.property.lower(), " ".join(d.value.split())) for d in rule.declarations
        )
        rules.append((sel, tuple(decls)))
    rules.sort()
    return ";".join(f"{sel}{{{','.join(f'{p}:{v}' for p, v in decls)}}}" for sel, decls in rules)


def scope_patch(patch: CssPatch, failure_range: tuple[int, int]) -> MediaScopedPatch:
    """Wrap a patch in the failure range, forcing ``!important`` everywhere.

    Idempotent on already-important declarations; never drops or reorders
    anything.
    """
    lo, hi = failure_range
    rules = tuple(
        CssRule(
            rule.selector,
            tuple(replace(d, important=True) for d in rule.declarations),
        )
        for rule in patch.rules
    )
    return MediaScopedPatch(int(lo), int(hi), CssPatch(rules))


def serialize(scoped: MediaScopedPatch) -> str:
    """Bit-exact serialization: fixed indentation, LF newlines, one space
    after colons, declarations in given order."""
    out = [f"@media (min-width: {scoped.min_width}px) and (max-width: {scoped.max_width}px) {{\n"]
    for rule in scoped.patch.rules:
        out.append(f"  {rule.selector} {{\n")
        for d in rule.declarations:
            out.append(f"    {d.property}: {d.value} !important;\n")
        out.append("  }\n")
    out.append("}\n")
    return "".join(out)


def selector_for(xpath: str, document: Document, snapshot: LayoutSnapshot | None = None) -> str:
    """Unique CSS selector for the element an XPath names.

    ``#id`` when the element has one, otherwise a ``:nth-child()`` chain
    from the nearest id-bearing ancestor (or from ``body``/``html``). The
    result is verified to match exactly one element in the document.
    """
    if snapshot is not None and snapshot.node(xpath) is None:
        raise SelectorError(f"{xpath} not present in snapshot at {snapshot.viewport_width}px")
    el = document.resolve_xpath(xpath)
    if el is None:
        raise SelectorError(f"xpath does not resolve: {xpath}")

    if el.id:
        selector = f"#{el.id}"
    else:
        steps = []
        cur = el
        anchor = None
        while cur is not None:
            if cur.id:
                anchor = f"#{cur.id}"
                break
            if cur.tag in ("body", "html"):
                anchor = cur.tag
                break
            steps.append(f"{cur.tag}:nth-child({cur.sibling_position()})")
            cur = cur.parent
        if anchor is None:
            anchor = "html"
        selector = " > ".join([anchor] + list(reversed(steps)))

    matches = cssparse.query_all(document.root, selector)
    if len(matches) != 1 or matches[0] is not el:
        raise SelectorError(f"selector {selector!r} is not unique for {xpath}")
    return selector
