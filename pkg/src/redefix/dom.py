"""Minimal HTML document model with positional XPath support.

Backed by the stdlib lenient parser; enough DOM for selector matching,
XPath resolution and the offline renderer. Not a standards-complete HTML
parser: misnested end tags are recovered by popping to the nearest open
match and void elements never take children.
"""

from __future__ import annotations

from html.parser import HTMLParser
from typing import Iterator, Optional, Union

VOID_ELEMENTS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "source", "track", "wbr",
}


class Element:
    def __init__(self, tag: str, attrs: Optional[dict[str, str]] = None):
        self.tag = tag.lower()
        self.attrs = attrs or {}
        self.parent: Optional[Element] = None
        self.children: list[Union[Element, str]] = []

    def __repr__(self):
        return f"<Element {self.xpath()}>"

    @property
    def id(self) -> Optional[str]:
        return self.attrs.get("id")

    @property
    def classes(self) -> list[str]:
        return self.attrs.get("class", "").split()

    @property
    def style_attr(self) -> str:
        return self.attrs.get("style", "")

    def append(self, node: Union["Element", str]) -> None:
        if isinstance(node, Element):
            node.parent = self
        self.children.append(node)

    def child_elements(self) -> list["Element"]:
        return [c for c in self.children if isinstance(c, Element)]

    def text_content(self) -> str:
        parts = []
        for c in self.children:
            if isinstance(c, str):
                parts.append(c)
            else:
                parts.append(c.text_content())
        return "".join(parts)

    def iter(self) -> Iterator["Element"]:
        yield self
        for c in self.child_elements():
            yield from c.iter()

    def ancestors(self) -> Iterator["Element"]:
        cur = self.parent
        while cur is not None:
            yield cur
            cur = cur.parent

    def sibling_position(self) -> int:
        """1-based position among all element siblings (CSS nth-child)."""
        if self.parent is None:
            return 1
        return self.parent.child_elements().index(self) + 1

    def same_tag_position(self) -> int:
        """1-based position among same-tag element siblings (XPath step)."""
        if self.parent is None:
            return 1
        same = [e for e in self.parent.child_elements() if e.tag == self.tag]
        return same.index(self) + 1

    def xpath(self) -> str:
        """Canonical positional XPath; html and body steps stay bare."""
        steps = []
        cur: Optional[Element] = self
        while cur is not None:
            if cur.tag in ("html", "body") and cur.same_tag_position() == 1:
                steps.append(cur.tag)
            else:
                steps.append(f"{cur.tag}[{cur.same_tag_position()}]")
            cur = cur.parent
        return "/" + "/".join(reversed(steps))


class Document:
    def __init__(self, root: Element):
        self.root = root

    def iter(self) -> Iterator[Element]:
        return self.root.iter()

    @property
    def head(self) -> Optional[Element]:
        return self.find_first("head")

    @property
    def body(self) -> Optional[Element]:
        return self.find_first("body")

    def find_first(self, tag: str) -> Optional[Element]:
        for e in self.iter():
            if e.tag == tag:
                return e
        return None

    def get_element_by_id(self, el_id: str) -> Optional[Element]:
        for e in self.iter():
            if e.attrs.get("id") == el_id:
                return e
        return None

    def resolve_xpath(self, xpath: str) -> Optional[Element]:
        """Resolve a positional XPath like /html/body/div[2]/p[1]."""
        if not xpath.startswith("/"):
            return None
        cur = None
        for step in xpath.strip("/").split("/"):
            if "[" in step:
                tag, _, rest = step.partition("[")
                try:
                    index = int(rest.rstrip("]"))
                except ValueError:
                    return None
            else:
                tag, index = step, 1
            tag = tag.lower()
            if cur is None:
                if self.root.tag != tag or index != 1:
                    return None
                cur = self.root
                continue
            same = [e for e in cur.child_elements() if e.tag == tag]
            if index < 1 or index > len(same):
                return None
            cur = same[index - 1]
        return cur

    def style_texts(self) -> list[str]:
        """Contents of every <style> element, in document order."""
        return [e.text_content() for e in self.iter() if e.tag == "style"]


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root: Optional[Element] = None
        self.stack: list[Element] = []

    def _ensure_root(self):
        if self.root is None:
            self.root = Element("html")
            self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        attr_map = {k.lower(): (v if v is not None else "") for k, v in attrs}
        if tag == "html":
            if self.root is None:
                self.root = Element("html", attr_map)
                self.stack = [self.root]
            return
        self._ensure_root()
        el = Element(tag, attr_map)
        self.stack[-1].append(el)
        if tag not in VOID_ELEMENTS:
            self.stack.append(el)

    def handle_startendtag(self, tag, attrs):
        tag = tag.lower()
        if tag in VOID_ELEMENTS or tag != "html":
            self._ensure_root()
            self.stack[-1].append(Element(tag, {k.lower(): v or "" for k, v in attrs}))

    def handle_endtag(self, tag):
        tag = tag.lower()
        if tag in VOID_ELEMENTS:
            return
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return

    def handle_data(self, data):
        if self.stack and data:
            self.stack[-1].append(data)


def parse_html(text: str) -> Document:
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    builder._ensure_root()
    # Normalize to an html > (head, body) shape so XPaths are stable.
    return Document(_normalize(builder.root))


def _normalize(root: Element) -> Element:
    has_body = any(e.tag == "body" for e in root.child_elements())
    if not has_body:
        body = Element("body")
        for node in list(root.children):
            if isinstance(node, Element) and node.tag in ("head", "body"):
                continue
            root.children.remove(node)
            body.append(node)
        root.append(body)
    if not any(e.tag == "head" for e in root.child_elements()):
        head = Element("head")
        head.parent = root
        root.children.insert(0, head)
    return root
