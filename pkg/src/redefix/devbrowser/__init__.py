"""Offline WebDriver-compatible renderer for fixture pages and CI.

Implements enough of the WebDriver wire protocol (session, navigation,
window rect, script execution, element rects, screenshots) over an embedded
deterministic HTML/CSS layout engine that the full detection and repair
pipeline runs without a real browser. The engine covers the documented CSS
subset the shipped fixtures use (block flow, inline-block lines, floats,
absolute/relative positioning, px/% lengths, margins/padding/borders,
box-sizing, min/max-width, media queries, ``!important``); it is not a
general-purpose browser, and pages outside the subset will lay out
approximately.
"""

from .server import DevBrowserServer

__all__ = ["DevBrowserServer"]
