"""Computed-style resolution for the offline renderer.

Standard cascade over three origins (user-agent defaults, author sheets in
document + injection order, inline style), keyed by importance, origin,
specificity and source order. Shorthands for margin, padding, border and
overflow are expanded at collection time.
"""

from __future__ import annotations

from ..cssparse import MediaQuery, StyleRule, parse_declarations, parse_selector, parse_stylesheet
from ..dom import Document, Element

UA_CSS = """
html, body, address, article, aside, blockquote, div, dl, dt, dd, fieldset,
figcaption, figure, footer, form, h1, h2, h3, h4, h5, h6, header, hr, li,
main, nav, ol, p, pre, section, table, ul { display: block; }
head, link, meta, script, style, title { display: none; }
body { margin: 8px; }
"""

DEFAULT_FONT_SIZE = 16.0

_EDGES = ("top", "right", "bottom", "left")


def expand_shorthand(prop: str, value: str) -> list[tuple[str, str]]:
    if prop in ("margin", "padding"):
        parts = value.split()
        if not 1 <= len(parts) <= 4:
            return []
        if len(parts) == 1:
            t, r, b, l = parts[0], parts[0], parts[0], parts[0]
        elif len(parts) == 2:
            t, r, b, l = parts[0], parts[1], parts[0], parts[1]
        elif len(parts) == 3:
            t, r, b, l = parts[0], parts[1], parts[2], parts[1]
        else:
            t, r, b, l = parts
        return [(f"{prop}-top", t), (f"{prop}-right", r), (f"{prop}-bottom", b), (f"{prop}-left", l)]
    if prop == "border":
        width = "0"
        if value.strip() in ("none", "0"):
            width = "0"
        else:
            for token in value.split():
                if token[0].isdigit() or token.startswith("."):
                    width = token
                    break
            else:
                width = "3px"  # border with unspecified width: CSS medium
        return [(f"border-{edge}-width", width) for edge in _EDGES]
    if prop == "border-width":
        parts = value.split()
        if len(parts) == 1:
            parts = parts * 4
        elif len(parts) == 2:
            parts = [parts[0], parts[1], parts[0], parts[1]]
        elif len(parts) == 3:
            parts = [parts[0], parts[1], parts[2], parts[1]]
        elif len(parts) != 4:
            return []
        return list(zip((f"border-{e}-width" for e in _EDGES), parts))
    if prop in ("border-top", "border-right", "border-bottom", "border-left"):
        for token in value.split():
            if token[0].isdigit() or token.startswith("."):
                return [(f"{prop}-width", token)]
        return [(f"{prop}-width", "0" if value.strip() == "none" else "3px")]
    if prop == "overflow":
        return [("overflow-x", value), ("overflow-y", value)]
    return [(prop, value)]


def parse_length(value: str | None, reference: float | None = None,
                 font_size: float = DEFAULT_FONT_SIZE) -> float | None:
    """Resolve a CSS length; None means auto/unresolvable.

    Percentages need a reference; em resolves against the font size.
    """
    if value is None:
        return None
    v = value.strip().lower()
    if v in ("", "auto", "none", "initial", "inherit"):
        return None
    try:
        if v.endswith("px"):
            return float(v[:-2])
        if v.endswith("%"):
            if reference is None:
                return None
            return reference * float(v[:-1]) / 100.0
        if v.endswith("em"):
            return font_size * float(v[:-2])
        return float(v)
    except ValueError:
        return None


class StyleResolver:
    """Resolves computed styles against UA + author + injected sheets."""

    def __init__(self, document: Document, injected_sheets: list[str] | None = None):
        self.document = document
        self._compiled: list[tuple[tuple, MediaQuery | None, object, str, str]] = []
        order = 0
        order = self._compile(UA_CSS, origin=0, start_order=order)
        for sheet in document.style_texts():
            order = self._compile(sheet, origin=1, start_order=order)
        for sheet in injected_sheets or []:
            order = self._compile(sheet, origin=1, start_order=order)

    def _compile(self, css_text: str, origin: int, start_order: int) -> int:
        rules = parse_stylesheet(css_text, start_order=start_order)
        last = start_order
        for rule in rules:
            selector = parse_selector(rule.selector)
            if selector is None:
                continue
            spec = selector.specificity()
            for decl in rule.declarations:
                for prop, value in expand_shorthand(decl.prop, decl.value):
                    key = (1 if decl.important else 0, origin, spec, rule.order)
                    self._compiled.append((key, rule.media, selector, prop, value))
            last = rule.order
        return last + 1

    def computed(self, element: Element, viewport_width: float) -> dict[str, str]:
        candidates: dict[str, tuple] = {}

        def offer(prop, value, key):
            if prop not in candidates or key >= candidates[prop][0]:
                candidates[prop] = (key, value)

        for key, media, selector, prop, value in self._compiled:
            if media is not None and not media.matches(viewport_width):
                continue
            if selector.matches(element):
                offer(prop, value, key)

        inline = parse_declarations(element.style_attr)
        inline_spec = (1, 0, 0)
        for i, decl in enumerate(inline):
            for prop, value in expand_shorthand(decl.prop, decl.value):
                key = (1 if decl.important else 0, 2, inline_spec, i)
                offer(prop, value, key)

        return {prop: value for prop, (key, value) in candidates.items()}
