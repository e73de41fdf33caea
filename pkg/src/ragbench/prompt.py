"""Render retrieved contexts and the query into the generation prompt.

The format is fixed:

    Context: Question: <q1> Answer: <a1> ... Question: <query> Answer:

with whole contexts dropped lowest-rank-first when the token budget would
be exceeded. With zero contexts the "Context:" prefix is omitted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import QaPair
from .rerank import RankedContext

DEFAULT_TOKEN_BUDGET = 512


class PromptBudgetError(ValueError):
    """Raised when even the zero-context prompt exceeds the budget."""


@dataclass(frozen=True)
class PromptBundle:
    query: str
    contexts: tuple[RankedContext, ...]
    rendered: str
    token_count: int
    dropped_contexts: int


def render_context(qa: QaPair) -> str:
    return f"Question: {qa.question} Answer: {qa.answer}"


def count_tokens(text: str, tokenizer: Callable[[str], int] | None = None) -> int:
    """Token count under the pluggable tokenizer (default: whitespace)."""
    if tokenizer is not None:
        return tokenizer(text)
    return len(text.split())


def _render(query: str, contexts: Sequence[RankedContext], worst_first: bool) -> str:
    if not contexts:
        return f"Question: {query} Answer:"
    ordered = list(reversed(contexts)) if worst_first else list(contexts)
    joined = " ".join(render_context(ctx.qa) for ctx in ordered)
    return f"Context: {joined} Question: {query} Answer:"


def assemble_prompt(
    query: str,
    contexts: Sequence[RankedContext],
    budget: int = DEFAULT_TOKEN_BUDGET,
    tokenizer: Callable[[str], int] | None = None,
    worst_first: bool = False,
) -> PromptBundle:
    """Build the prompt, dropping whole lowest-rank contexts to fit the
    budget. The query itself is never truncated; if it alone does not fit,
    assembly fails."""
    kept = sorted(contexts, key=lambda ctx: ctx.rank)
    while True:
        rendered = _render(query, kept, worst_first)
        tokens = count_tokens(rendered, tokenizer)
        if tokens <= budget:
            return PromptBundle(
                query=query,
                contexts=tuple(kept),
                rendered=rendered,
                token_count=tokens,
                dropped_contexts=len(contexts) - len(kept),
            )
        if not kept:
            raise PromptBudgetError(
                f"query alone needs {tokens} tokens, over the budget of {budget}"
            )
        kept.pop()  # lowest rank goes first


_PROMPT_RE = re.compile(r"^(?:Context: (?P<ctx>.*) )?Question: (?P<query>.*) Answer:$", re.DOTALL)
_CONTEXT_RE = re.compile(r"Question: (.*?) Answer: (.*?)(?= Question: |$)", re.DOTALL)


def parse_prompt(rendered: str) -> tuple[list[tuple[str, str]], str]:
    """Best-effort inverse of assemble_prompt for marker-free texts.

    Returns ([(question, answer), ...], query). Texts containing the literal
    markers "Question: " or " Answer:" are rendered verbatim and may not
    round-trip."""
    match = _PROMPT_RE.match(rendered)
    if not match:
        raise ValueError("text does not match the prompt grammar")
    ctx_blob = match.group("ctx")
    contexts = _CONTEXT_RE.findall(ctx_blob) if ctx_blob else []
    return [(q, a) for q, a in contexts], match.group("query")
