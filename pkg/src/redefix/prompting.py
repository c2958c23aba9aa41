"""Repair prompt assembly with token budgeting.

Every prompt has the same five sections in a fixed order: role designation,
task description, failure context, retrieved Stack Overflow posts and the
chain-of-thought closer. Retry prompts append a fixed template carrying the
failed patch, so the previous prompt text is always a strict prefix of its
successor. Section wording lives in template files under
``data/templates``, not in code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Optional, Sequence

from .csspatch import CssPatch, compact_css
from .errors import RedefixError
from .geometry import BoundingBox
from .kb.store import KbDocument
from .layout_model import RlfRecord

SECTION_KINDS = ("role", "task", "context", "so_posts", "cot")
SECTION_SEPARATOR = "\n\n"
DEFAULT_IMAGE_TOKEN_COST = 1600
RETRY_TEMPLATE = (
    "The fixed version is still not correct-{patch}. "
    "Please fix it again. Let's think step by step."
)


class PromptBudgetError(RedefixError):
    """The prompt cannot fit the token budget even after reduction."""


def load_template(name: str) -> str:
    return resources.files("redefix").joinpath(f"data/templates/{name}.txt").read_text()


def estimate_tokens(text: str, image_count: int = 0,
                    image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST) -> int:
    """Provider-agnostic approximation: one token per four characters plus a
    flat per-image surcharge."""
    return math.ceil(len(text) / 4) + image_token_cost * image_count


@dataclass
class RlfContext:
    rlf: RlfRecord
    rlf_definition: str
    localized: list[tuple[str, str]]  # (xpath, property), best first
    coordinates: dict[str, BoundingBox]
    page_excerpt: str
    screenshot_inside: Optional[object] = None
    screenshot_outside: Optional[object] = None

    def images(self) -> list:
        return [s for s in (self.screenshot_inside, self.screenshot_outside) if s is not None]


@dataclass(frozen=True)
class Prompt:
    sections: tuple[tuple[str, str], ...]
    images: tuple = ()
    retry_suffixes: tuple[str, ...] = ()
    token_estimate: int = 0
    budget: int = 0
    image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST

    @property
    def text(self) -> str:
        parts = [text for _, text in self.sections]
        parts.extend(self.retry_suffixes)
        return SECTION_SEPARATOR.join(parts)

    def section(self, kind: str) -> str:
        for k, text in self.sections:
            if k == kind:
                return text
        raise KeyError(kind)


def _render_post(doc: KbDocument) -> str:
    lines = [f"TITLE: {doc.metadata.get('TITLE', '')}", f"LINK: {doc.metadata.get('LINK', '')}"]
    lines.append(f"QUESTION: {doc.cleaned_question}")
    for i, answer in enumerate(doc.answers, start=1):
        lines.append(f"ANSWER {i}: {answer}")
    for i, comment in enumerate(doc.comments, start=1):
        lines.append(f"COMMENT {i}: {comment}")
    return "\n".join(lines)


def _render_so_section(retrieved: Sequence[KbDocument]) -> str:
    if not retrieved:
        return ""
    posts = "\n\n".join(_render_post(d) for d in retrieved)
    return load_template("so_posts").replace("{{so_posts}}", posts)


def _render_context(ctx: RlfContext, excerpt: str) -> str:
    pairs = "\n".join(f"- {xpath} :: {prop}" for xpath, prop in ctx.localized)
    coords = "\n".join(
        f"- {xpath}: ({box.x:g}, {box.y:g}, {box.width:g}, {box.height:g})"
        for xpath, box in sorted(ctx.coordinates.items())
    )
    lo, hi = ctx.rlf.failure_range
    return (
        load_template("context")
        .replace("{{rlf_type}}", ctx.rlf.rlf_type.value)
        .replace("{{definition}}", ctx.rlf_definition)
        .replace("{{range_min}}", str(lo))
        .replace("{{range_max}}", str(hi))
        .replace("{{localized_pairs}}", pairs)
        .replace("{{coordinates}}", coords)
        .replace("{{excerpt}}", excerpt)
    )


def _assemble(ctx: RlfContext, retrieved: Sequence[KbDocument], excerpt: str,
              budget: int, image_token_cost: int) -> Prompt:
    sections = (
        ("role", load_template("role")),
        ("task", load_template("task")),
        ("context", _render_context(ctx, excerpt)),
        ("so_posts", _render_so_section(retrieved)),
        ("cot", load_template("cot")),
    )
    prompt = Prompt(
        sections=sections,
        images=tuple(ctx.images()),
        budget=budget,
        image_token_cost=image_token_cost,
    )
    return replace(
        prompt,
        token_estimate=estimate_tokens(prompt.text, len(prompt.images), image_token_cost),
    )


def build_prompt(ctx: RlfContext, retrieved: Sequence[KbDocument], budget: int,
                 image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST) -> Prompt:
    """Assemble the five-section prompt within the token budget.

    Over budget, retrieved documents are dropped from the lowest-ranked end
    first, then the page excerpt is truncated. If the irreducible sections
    still do not fit, the budget error signals loop termination.
    """
    if len(retrieved) > 5:
        retrieved = list(retrieved)[:5]
    docs = list(retrieved)
    prompt = _assemble(ctx, docs, ctx.page_excerpt, budget, image_token_cost)
    while prompt.token_estimate > budget and docs:
        docs.pop()
        prompt = _assemble(ctx, docs, ctx.page_excerpt, budget, image_token_cost)
    excerpt = ctx.page_excerpt
    while prompt.token_estimate > budget and excerpt:
        overshoot_chars = (prompt.token_estimate - budget) * 4
        excerpt = excerpt[: max(0, len(excerpt) - overshoot_chars)]
        prompt = _assemble(ctx, docs, excerpt, budget, image_token_cost)
    if prompt.token_estimate > budget:
        raise PromptBudgetError(
            f"irreducible prompt needs {prompt.token_estimate} tokens, budget is {budget}"
        )
    return prompt


def build_retry(previous: Prompt, failed_patch: CssPatch) -> Prompt:
    """Append the fixed retry template with the failed patch embedded."""
    suffix = RETRY_TEMPLATE.format(patch=compact_css(failed_patch))
    prompt = replace(previous, retry_suffixes=previous.retry_suffixes + (suffix,))
    estimate = estimate_tokens(prompt.text, len(prompt.images), prompt.image_token_cost)
    if estimate > previous.budget:
        raise PromptBudgetError(
            f"retry prompt needs {estimate} tokens, budget is {previous.budget}"
        )
    return replace(prompt, token_estimate=estimate)
