"""Deterministic box layout for the offline renderer.

Top-down single pass: block boxes stack vertically and fill the containing
width; inline-blocks, floats and inline atoms flow into lines that wrap at
the content edge; absolutes resolve against the nearest positioned
ancestor's padding box and do not disturb flow. Text is measured with a
fixed-metrics model (character width 0.5em, line height 1.25em) so
geometry never depends on platform fonts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..dom import Document, Element
from .style import DEFAULT_FONT_SIZE, StyleResolver, parse_length

CHAR_WIDTH_EM = 0.5
LINE_HEIGHT_EM = 1.25

BLOCKISH = ("block", "flex", "grid", "table", "list-item")


@dataclass
class LayoutBox:
    """Border-box geometry of one rendered element."""

    element: Element
    x: float = 0.0
    y: float = 0.0
    width: float = 0.0
    height: float = 0.0
    children: list["LayoutBox"] = field(default_factory=list)

    @property
    def right(self) -> float:
        return self.x + self.width

    @property
    def bottom(self) -> float:
        return self.y + self.height

    def iter(self):
        yield self
        for c in self.children:
            yield from c.iter()


@dataclass
class _Edges:
    top: float = 0.0
    right: float = 0.0
    bottom: float = 0.0
    left: float = 0.0

    @property
    def horizontal(self):
        return self.left + self.right

    @property
    def vertical(self):
        return self.top + self.bottom


class LayoutEngine:
    def __init__(self, resolver: StyleResolver, viewport_width: float):
        self.resolver = resolver
        self.viewport = viewport_width

    # -- style helpers -------------------------------------------------

    def _style(self, el: Element) -> dict[str, str]:
        return self.resolver.computed(el, self.viewport)

    def _font_size(self, style: dict, parent_font: float) -> float:
        size = parse_length(style.get("font-size"), reference=parent_font, font_size=parent_font)
        return size if size and size > 0 else parent_font

    def _edges(self, style: dict, prefix: str, cb_width: float, font: float,
               default: float = 0.0) -> _Edges:
        out = _Edges()
        for edge in ("top", "right", "bottom", "left"):
            if prefix == "border":
                raw = style.get(f"border-{edge}-width")
            else:
                raw = style.get(f"{prefix}-{edge}")
            resolved = parse_length(raw, reference=cb_width, font_size=font)
            setattr(out, edge, resolved if resolved is not None else default)
        return out

    def _display(self, el: Element, style: dict) -> str:
        d = style.get("display", "").strip().lower()
        if d == "none":
            return "none"
        if d in BLOCKISH:
            return "block"
        if d == "inline-block":
            return "inline-block"
        if d:
            return "inline"
        return "inline"  # unstyled unknown elements behave as inline atoms

    # -- size resolution -----------------------------------------------

    def _border_box_width(self, style: dict, cb_width: float, font: float,
                          padding: _Edges, border: _Edges,
                          margins_h: float, is_block: bool) -> float | None:
        """Used border-box width, or None when auto must shrink to fit."""
        box_sizing = style.get("box-sizing", "content-box").strip()
        specified = parse_length(style.get("width"), reference=cb_width, font_size=font)
        extras = padding.horizontal + border.horizontal
        if specified is not None:
            width = specified if box_sizing == "border-box" else specified + extras
        elif is_block:
            width = cb_width - margins_h
        else:
            width = None
        if width is not None:
            width = self._clamp_width(width, style, cb_width, font, extras, box_sizing)
            width = max(width, extras)
        return width

    def _clamp_width(self, border_width: float, style: dict, cb_width: float,
                     font: float, extras: float, box_sizing: str) -> float:
        lo = parse_length(style.get("min-width"), reference=cb_width, font_size=font)
        hi = parse_length(style.get("max-width"), reference=cb_width, font_size=font)
        if hi is not None:
            hi_border = hi if box_sizing == "border-box" else hi + extras
            border_width = min(border_width, hi_border)
        if lo is not None:
            lo_border = lo if box_sizing == "border-box" else lo + extras
            border_width = max(border_width, lo_border)
        return border_width

    # -- main recursion ------------------------------------------------

    def layout(self, document: Document) -> LayoutBox:
        html = document.root
        style = self._style(html)
        font = self._font_size(style, DEFAULT_FONT_SIZE)
        box = LayoutBox(html, 0.0, 0.0, self.viewport, 0.0)
        pad = self._edges(style, "padding", self.viewport, font)
        bor = self._edges(style, "border", self.viewport, font)
        inner = self.viewport - pad.horizontal - bor.horizontal
        abs_cb = (0.0, 0.0, self.viewport, None)
        content_h = self._flow_children(
            html, box, bor.left + pad.left, bor.top + pad.top, inner, font, abs_cb
        )
        explicit_h = parse_length(style.get("height"), reference=None, font_size=font)
        box.height = explicit_h if explicit_h is not None else content_h + pad.vertical + bor.vertical
        return box

    def _flow_children(self, el: Element, parent_box: LayoutBox, content_x: float,
                       content_y: float, content_width: float, font: float,
                       abs_cb: tuple) -> float:
        """Lay out children into parent; returns content height used.

        ``content_x``/``content_y`` are offsets of the content origin from
        the parent's border-box origin; children are positioned in page
        coordinates.
        """
        origin_x = parent_box.x + content_x
        origin_y = parent_box.y + content_y
        cursor_y = 0.0
        line: list[tuple[LayoutBox, float]] = []
        line_left = 0.0
        line_right = 0.0  # consumed from the right edge by right floats
        line_height = 0.0

        def flush_line():
            nonlocal cursor_y, line, line_left, line_right, line_height
            if line or line_height:
                cursor_y += line_height
            line, line_left, line_right, line_height = [], 0.0, 0.0, 0.0

        for node in el.children:
            if isinstance(node, str):
                text = " ".join(node.split())
                if not text:
                    continue
                text_w = len(text) * CHAR_WIDTH_EM * font
                line_h = LINE_HEIGHT_EM * font
                remaining = content_width - line_left - line_right
                if text_w <= remaining or not line:
                    if text_w <= max(remaining, 0):
                        line_left += text_w
                        line_height = max(line_height, line_h)
                    else:
                        flush_line()
                        lines = max(1, -(-int(text_w) // max(int(content_width), 1)))
                        cursor_y += lines * line_h
                else:
                    flush_line()
                    lines = max(1, -(-int(text_w) // max(int(content_width), 1)))
                    cursor_y += lines * line_h
                continue

            child = node
            style = self._style(child)
            display = self._display(child, style)
            if display == "none":
                continue
            position = style.get("position", "static").strip()
            child_font = self._font_size(style, font)

            if position == "absolute":
                box = self._layout_absolute(child, style, child_font, abs_cb)
                parent_box.children.append(box)
                continue

            float_side = style.get("float", "none").strip()
            is_line_item = display in ("inline-block", "inline") or float_side in ("left", "right")

            if not is_line_item:
                flush_line()
                box, outer_h = self._place_block(
                    child, style, child_font, origin_x, origin_y + cursor_y,
                    content_width, abs_cb,
                )
                parent_box.children.append(box)
                cursor_y += outer_h
            else:
                margin = self._edges(style, "margin", content_width, child_font)
                box = self._build_box(child, style, child_font, content_width, abs_cb,
                                      shrink_to_fit=True)
                outer_w = box.width + margin.horizontal
                outer_h = box.height + margin.vertical
                remaining = content_width - line_left - line_right
                if line and outer_w > remaining + 0.01:
                    flush_line()
                if float_side == "right":
                    x = origin_x + content_width - line_right - margin.right - box.width
                    line_right += outer_w
                else:
                    x = origin_x + line_left + margin.left
                    line_left += outer_w
                self._shift(box, x, origin_y + cursor_y + margin.top)
                parent_box.children.append(box)
                line.append((box, outer_w))
                line_height = max(line_height, outer_h)

            if position == "relative":
                self._apply_relative_offset(box, style, child_font, content_width)

        flush_line()
        return cursor_y

    def _place_block(self, el: Element, style: dict, font: float, flow_x: float,
                     flow_y: float, cb_width: float, abs_cb: tuple):
        margin = self._edges(style, "margin", cb_width, font)
        pad = self._edges(style, "padding", cb_width, font)
        bor = self._edges(style, "border", cb_width, font)
        width = self._border_box_width(style, cb_width, font, pad, bor,
                                       margin.horizontal, is_block=True)
        # Auto horizontal margins center a fixed-width block.
        specified_w = parse_length(style.get("width"), reference=cb_width, font_size=font)
        if specified_w is not None:
            auto_left = style.get("margin-left", "").strip() == "auto"
            auto_right = style.get("margin-right", "").strip() == "auto"
            free = cb_width - width
            if auto_left and auto_right:
                margin.left = margin.right = free / 2.0
            elif auto_left:
                margin.left = free - margin.right
            elif auto_right:
                margin.right = free - margin.left

        box = LayoutBox(el, flow_x + margin.left, flow_y + margin.top, width, 0.0)
        inner_w = width - pad.horizontal - bor.horizontal
        new_abs_cb = self._abs_cb_for(box, style, pad, bor, abs_cb)
        content_h = self._flow_children(
            el, box, bor.left + pad.left, bor.top + pad.top, inner_w, font, new_abs_cb
        )
        explicit_h = parse_length(style.get("height"), reference=None, font_size=font)
        box.height = (
            explicit_h + (0 if style.get("box-sizing", "").strip() == "border-box" else pad.vertical + bor.vertical)
            if explicit_h is not None
            else content_h + pad.vertical + bor.vertical
        )
        return box, box.height + margin.vertical

    def _build_box(self, el: Element, style: dict, font: float, cb_width: float,
                   abs_cb: tuple, shrink_to_fit: bool) -> LayoutBox:
        """Lay out an atom (inline-block/float/inline) at origin (0, 0)."""
        pad = self._edges(style, "padding", cb_width, font)
        bor = self._edges(style, "border", cb_width, font)
        width = self._border_box_width(style, cb_width, font, pad, bor, 0.0, is_block=False)
        if width is None:
            natural = self._natural_width(el, font)
            extras = pad.horizontal + bor.horizontal
            width = min(natural + extras, cb_width)
            width = self._clamp_width(width, style, cb_width, font, extras,
                                      style.get("box-sizing", "content-box").strip())
        box = LayoutBox(el, 0.0, 0.0, width, 0.0)
        inner_w = width - pad.horizontal - bor.horizontal
        new_abs_cb = self._abs_cb_for(box, style, pad, bor, abs_cb)
        content_h = self._flow_children(
            el, box, bor.left + pad.left, bor.top + pad.top, inner_w, font, new_abs_cb
        )
        explicit_h = parse_length(style.get("height"), reference=None, font_size=font)
        box.height = (
            explicit_h + (0 if style.get("box-sizing", "").strip() == "border-box" else pad.vertical + bor.vertical)
            if explicit_h is not None
            else content_h + pad.vertical + bor.vertical
        )
        return box

    def _natural_width(self, el: Element, font: float) -> float:
        """Crude max-content width: widest text run or child box."""
        width = 0.0
        for node in el.children:
            if isinstance(node, str):
                text = " ".join(node.split())
                width = max(width, len(text) * CHAR_WIDTH_EM * font)
            else:
                style = self._style(node)
                if self._display(node, style) == "none":
                    continue
                child_font = self._font_size(style, font)
                w = parse_length(style.get("width"), reference=None, font_size=child_font)
                if w is None:
                    w = self._natural_width(node, child_font)
                pad = self._edges(style, "padding", 0.0, child_font)
                bor = self._edges(style, "border", 0.0, child_font)
                width = max(width, w + pad.horizontal + bor.horizontal)
        return width

    def _layout_absolute(self, el: Element, style: dict, font: float, abs_cb: tuple) -> LayoutBox:
        cb_x, cb_y, cb_w, cb_h = abs_cb
        pad = self._edges(style, "padding", cb_w, font)
        bor = self._edges(style, "border", cb_w, font)
        left = parse_length(style.get("left"), reference=cb_w, font_size=font)
        right = parse_length(style.get("right"), reference=cb_w, font_size=font)
        top = parse_length(style.get("top"), reference=cb_h, font_size=font)

        width = self._border_box_width(style, cb_w, font, pad, bor, 0.0, is_block=False)
        if width is None:
            if left is not None and right is not None:
                width = cb_w - left - right
            else:
                extras = pad.horizontal + bor.horizontal
                width = min(self._natural_width(el, font) + extras, cb_w)

        if left is not None:
            x = cb_x + left
        elif right is not None:
            x = cb_x + cb_w - right - width
        else:
            x = cb_x

        y = cb_y + (top if top is not None else 0.0)

        box = LayoutBox(el, x, y, width, 0.0)
        inner_w = width - pad.horizontal - bor.horizontal
        new_abs_cb = self._abs_cb_for(box, style, pad, bor, abs_cb)
        content_h = self._flow_children(
            el, box, bor.left + pad.left, bor.top + pad.top, inner_w, font, new_abs_cb
        )
        explicit_h = parse_length(style.get("height"), reference=cb_h, font_size=font)
        box.height = (
            explicit_h + (0 if style.get("box-sizing", "").strip() == "border-box" else pad.vertical + bor.vertical)
            if explicit_h is not None
            else content_h + pad.vertical + bor.vertical
        )
        return box

    def _abs_cb_for(self, box: LayoutBox, style: dict, pad: _Edges, bor: _Edges,
                    inherited: tuple) -> tuple:
        if style.get("position", "static").strip() in ("relative", "absolute", "fixed"):
            h = parse_length(style.get("height"), reference=None)
            return (
                box.x + bor.left,
                box.y + bor.top,
                box.width - bor.horizontal,
                h,
            )
        return inherited

    def _apply_relative_offset(self, box: LayoutBox, style: dict, font: float,
                               cb_width: float) -> None:
        left = parse_length(style.get("left"), reference=cb_width, font_size=font)
        right = parse_length(style.get("right"), reference=cb_width, font_size=font)
        top = parse_length(style.get("top"), reference=None, font_size=font)
        bottom = parse_length(style.get("bottom"), reference=None, font_size=font)
        dx = left if left is not None else (-right if right is not None else 0.0)
        dy = top if top is not None else (-bottom if bottom is not None else 0.0)
        if dx or dy:
            self._shift(box, box.x + dx, box.y + dy)

    def _shift(self, box: LayoutBox, new_x: float, new_y: float) -> None:
        dx, dy = new_x - box.x, new_y - box.y
        if dx == 0 and dy == 0:
            return
        for b in box.iter():
            b.x += dx
            b.y += dy
