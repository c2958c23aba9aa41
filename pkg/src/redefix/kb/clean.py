"""HTML cleaning for Stack Overflow post bodies.

Strips every tag except ``<code>``/``</code>`` pairs, decodes entities, and
collapses whitespace outside code spans while keeping code content
verbatim. Decoded ``<`` characters outside code are re-escaped to ``&lt;``
so the cleaned text stays free of markup-like sequences other than the
code markers.
"""

from __future__ import annotations

from html.parser import HTMLParser


class _Segmenter(HTMLParser):
    """Flattens markup into (inside_code, text) segments."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.segments: list[tuple[bool, str]] = []
        self.code_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag == "code":
            self.code_depth += 1

    def handle_startendtag(self, tag, attrs):
        pass

    def handle_endtag(self, tag):
        if tag == "code" and self.code_depth:
            self.code_depth -= 1

    def handle_data(self, data):
        if data:
            self.segments.append((self.code_depth > 0, data))


def clean_html(body: str) -> str:
    parser = _Segmenter()
    parser.feed(body)
    parser.close()

    out: list[str] = []
    i = 0
    segments = parser.segments
    while i < len(segments):
        in_code, text = segments[i]
        if in_code:
            # Merge adjacent code segments into one verbatim span.
            chunk = [text]
            while i + 1 < len(segments) and segments[i + 1][0]:
                i += 1
                chunk.append(segments[i][1])
            out.append("<code>" + "".join(chunk) + "</code>")
        else:
            chunk = [text]
            while i + 1 < len(segments) and not segments[i + 1][0]:
                i += 1
                chunk.append(segments[i][1])
            merged = " ".join("".join(chunk).split())
            merged = merged.replace("<", "&lt;")
            if merged:
                lead = " " if out and text[:1].isspace() else ""
                trail = " " if "".join(chunk)[-1:].isspace() else ""
                out.append(lead + merged + trail)
            elif out:
                out.append(" ")  # whitespace-only gap between code spans
        i += 1

    return "".join(out).strip()
