"""Shared lexical tokenizer.

Lowercases and splits on anything that is not alphanumeric or ``-`` so CSS
property names like ``box-sizing`` survive as single tokens.
"""

import re

_TOKEN_RE = re.compile(r"[a-z0-9-]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())
