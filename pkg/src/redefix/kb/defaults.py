"""Shipped configuration defaults for knowledge-base construction.

Keyword sets seed the per-type Stack Overflow searches and can be
regenerated from the definition texts with :func:`redefix.kb.rake_keywords`
and then curated by hand. Property lexicons drive both the relevance filter
and the heuristic localizer; all of this is overridable from the config
file.
"""

from __future__ import annotations

import json
from importlib import resources

from ..layout_model import RlfType

# Small-range failures are detected and reported but never repaired, so no
# knowledge is ingested for them.
REPAIRABLE_TYPES = [
    RlfType.ELEMENT_COLLISION,
    RlfType.ELEMENT_PROTRUSION,
    RlfType.VIEWPORT_PROTRUSION,
    RlfType.WRAPPING_ELEMENTS,
]

DEFAULT_KEYWORDS: dict[RlfType, list[str]] = {
    RlfType.ELEMENT_COLLISION: [
        "elements collide",
        "elements overlap",
        "divs overlapping each other",
    ],
    RlfType.ELEMENT_PROTRUSION: [
        "child overflows parent",
        "content overflows container",
        "element sticks out of parent",
    ],
    RlfType.VIEWPORT_PROTRUSION: [
        "appear outside screen",
        "element goes off screen",
        "content cut off right side",
    ],
    RlfType.WRAPPING_ELEMENTS: [
        "elements wrap to next line",
        "inline blocks wrapping",
        "floats drop below",
    ],
}

DEFAULT_PROPERTY_LEXICONS: dict[RlfType, list[str]] = {
    RlfType.ELEMENT_COLLISION: [
        "margin", "padding", "position", "top", "left", "float",
        "display", "flex-wrap", "width",
    ],
    RlfType.ELEMENT_PROTRUSION: [
        "width", "max-width", "min-width", "box-sizing", "overflow",
        "padding", "border",
    ],
    RlfType.VIEWPORT_PROTRUSION: [
        "width", "max-width", "position", "left", "right", "overflow-x",
    ],
    RlfType.WRAPPING_ELEMENTS: [
        "width", "white-space", "flex-wrap", "float", "display", "font-size",
    ],
}

# Compact English stopword list for RAKE over definition sentences.
DEFAULT_STOPWORDS = frozenset(
    """
    a about above after again all am an and any are as at be because been
    before being below between both but by can did do does doing down during
    each few for from further had has have having he her here hers him his
    how i if in into is it its itself just me more most my no nor not of off
    on once only or other our ours out over own same she should so some such
    than that the their theirs them then there these they this those through
    to too under until up very was we were what when where which while who
    whom why will with you your yours
    """.split()
)


def load_definitions() -> dict[RlfType, str]:
    """Failure-type definition texts shipped as package data."""
    raw = resources.files("redefix").joinpath("data/rlf_definitions.json").read_text()
    parsed = json.loads(raw)
    return {RlfType(key): value for key, value in parsed.items()}
