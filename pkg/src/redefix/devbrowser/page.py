"""One loaded page: DOM, stylesheets, cached layouts, probe and rendering."""

from __future__ import annotations

import hashlib
import io
import math

from PIL import Image, ImageDraw

from ..cssparse import query_all
from ..dom import Document, Element, parse_html
from ..errors import RedefixError
from .layout import LayoutBox, LayoutEngine
from .style import StyleResolver


class PageError(RedefixError):
    pass


class Page:
    def __init__(self, html_text: str, url: str):
        self.url = url
        self.source = html_text
        self.document: Document = parse_html(html_text)
        self.injected: list[tuple[str, str]] = []
        self._layout_cache: dict[int, LayoutBox] = {}

    # -- styles ---------------------------------------------------------

    def inject_style(self, marker_id: str, css_text: str) -> None:
        if any(m == marker_id for m, _ in self.injected):
            raise PageError(f"style marker already injected: {marker_id}")
        self.injected.append((marker_id, css_text))
        self._layout_cache.clear()

    def remove_style(self, marker_id: str) -> None:
        before = len(self.injected)
        self.injected = [(m, css) for m, css in self.injected if m != marker_id]
        if len(self.injected) == before:
            raise PageError(f"unknown style marker: {marker_id}")
        self._layout_cache.clear()

    def _resolver(self) -> StyleResolver:
        return StyleResolver(self.document, [css for _, css in self.injected])

    # -- layout -----------------------------------------------------------

    def layout_at(self, width: int) -> LayoutBox:
        width = int(width)
        if width not in self._layout_cache:
            engine = LayoutEngine(self._resolver(), float(width))
            self._layout_cache[width] = engine.layout(self.document)
        return self._layout_cache[width]

    def page_height(self, width: int) -> float:
        root = self.layout_at(width)
        return max((b.bottom for b in root.iter()), default=0.0)

    def visible_boxes(self, width: int) -> list[tuple[Element, LayoutBox, int]]:
        """(element, box, parent_index) triples in document order.

        parent_index points at the nearest ancestor that made it into the
        list, -1 for the root entry.
        """
        out: list[tuple[Element, LayoutBox, int]] = []

        def walk(box: LayoutBox, ancestor_idx: int):
            visible = box.width > 0 and box.height > 0
            my_idx = ancestor_idx
            if visible:
                my_idx = len(out)
                out.append((box.element, box, ancestor_idx))
            for child in box.children:
                walk(child, my_idx)

        walk(self.layout_at(width), -1)
        return out

    def probe(self, width: int, window_height: int) -> dict:
        elements = []
        for element, box, parent_idx in self.visible_boxes(width):
            elements.append(
                {
                    "xpath": element.xpath(),
                    "rect": {"x": box.x, "y": box.y, "width": box.width, "height": box.height},
                    "parent_index": parent_idx,
                }
            )
        return {
            "elements": elements,
            "viewport": {"width": width, "height": window_height},
        }

    def find_elements(self, using: str, value: str, width: int) -> list[str]:
        """XPaths of matching elements (rendered or not)."""
        if using == "xpath":
            el = self.document.resolve_xpath(value)
            return [el.xpath()] if el is not None else []
        if using == "css selector":
            return [el.xpath() for el in query_all(self.document.root, value)]
        raise PageError(f"unsupported locator strategy: {using}")

    def rect_of(self, xpath: str, width: int) -> dict:
        for element, box, _ in self.visible_boxes(width):
            if element.xpath() == xpath:
                return {"x": box.x, "y": box.y, "width": box.width, "height": box.height}
        raise PageError(f"element not rendered at {width}px: {xpath}")

    def computed_value(self, selector: str, prop: str, width: int) -> str | None:
        matches = query_all(self.document.root, selector)
        if not matches:
            return None
        element = matches[0]
        if prop in ("width", "height"):
            for el, box, _ in self.visible_boxes(width):
                if el is element:
                    return f"{getattr(box, prop):g}px"
            return "0px"
        style = self._resolver().computed(element, float(width))
        return style.get(prop)

    # -- rendering --------------------------------------------------------

    def screenshot(self, width: int) -> bytes:
        """Full-page PNG; each box filled with a color derived from its
        XPath so regions are visually distinguishable."""
        height = max(1, math.ceil(self.page_height(width)))
        image = Image.new("RGB", (max(1, int(width)), height), "white")
        draw = ImageDraw.Draw(image)
        for element, box, _ in self.visible_boxes(width):
            digest = hashlib.md5(element.xpath().encode()).digest()
            fill = (160 + digest[0] % 96, 160 + digest[1] % 96, 160 + digest[2] % 96)
            outline = (fill[0] - 80, fill[1] - 80, fill[2] - 80)
            x0, y0 = int(box.x), int(box.y)
            x1, y1 = int(box.right) - 1, int(box.bottom) - 1
            if x1 >= x0 and y1 >= y0:
                draw.rectangle([max(x0, 0), max(y0, 0), min(x1, image.width - 1), min(y1, height - 1)],
                               fill=fill, outline=outline)
        buf = io.BytesIO()
        image.save(buf, format="PNG")
        return buf.getvalue()
