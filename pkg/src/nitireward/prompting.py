"""Token-budgeted prompt assembly.

A prompt is the question, a blank line, a "Relevant sections" header and one
`<law_code>N</law_code><context>TEXT</context>` line per section. Builds
start from the retriever's top-k with every gold section force-included,
then shrink to the budget by repeatedly dropping the longest non-gold
section and pulling in the next-ranked candidate that still fits. Gold
sections are never dropped: if they alone overflow the budget, the build
fails with the overflow amount.

"Longest" is measured with the active token counter, not characters. The
trim loop runs on cached per-part counts for speed, but the returned
token_count is a whole-prompt count and the loop re-enters if a
non-additive counter pushes the whole over the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

CONTEXT_HEADER = "Relevant sections"
DEFAULT_BUDGET = 8192
DEFAULT_TOP_K = 10


class TokenCounter(Protocol):
    def count(self, text: str) -> int: ...


class HeuristicTokenCounter:
    """Offline stand-in: one token per three UTF-8 bytes, rounded up."""

    def count(self, text: str) -> int:
        return math.ceil(len(text.encode("utf-8")) / 3)


@dataclass
class PromptSection:
    code: int
    text: str


@dataclass
class PromptBundle:
    text: str
    included_codes: list[int]
    token_count: int
    replacements_made: int


class PromptBudgetError(ValueError):
    """The prompt cannot fit the budget without dropping protected content."""

    def __init__(self, reason: str, overflow: int):
        self.reason = reason
        self.overflow = overflow
        super().__init__(f"{reason}: over budget by {overflow} tokens")


def render_context_block(sections: Iterable[PromptSection]) -> str:
    return "\n".join(
        f"<law_code>{s.code}</law_code><context>{s.text}</context>" for s in sections
    )


def render_prompt(question: str, sections: Sequence[PromptSection]) -> str:
    return f"{question}\n\n{CONTEXT_HEADER}\n{render_context_block(sections)}"


@dataclass
class _Entry:
    code: int
    text: str
    rank: int  # retriever rank; forced gold outside the ranking gets a large rank
    tokens: int
    is_gold: bool

    def line(self) -> str:
        return f"<law_code>{self.code}</law_code><context>{self.text}</context>"


def build_prompt(
    question: str,
    ranked: Sequence[PromptSection],
    gold: frozenset[int] | set[int],
    budget: int = DEFAULT_BUDGET,
    k: int = DEFAULT_TOP_K,
    counter: TokenCounter | None = None,
    gold_texts: dict[int, str] | None = None,
) -> PromptBundle:
    """Assemble a prompt from ranked sections under the token budget.

    `ranked` is the retriever output in rank order (section objects need
    code and text). Gold sections missing from the ranking are looked up in
    gold_texts and force-included. At evaluation time call with gold=set()
    so nothing leaks.
    """
    counter = counter or HeuristicTokenCounter()
    gold = set(gold)
    gold_texts = gold_texts or {}

    def entry(code: int, text: str, rank: int) -> _Entry:
        line = f"<law_code>{code}</law_code><context>{text}</context>"
        return _Entry(code, text, rank, counter.count(line), code in gold)

    question_tokens = counter.count(render_prompt(question, []))
    if question_tokens > budget:
        raise PromptBudgetError("question alone exceeds the budget", question_tokens - budget)

    entries = [entry(s.code, s.text, i + 1) for i, s in enumerate(ranked)]
    selection = entries[:k]
    pool = entries[k:]

    # Force-include gold: replace the worst-ranked non-gold picks when full.
    selected_codes = {e.code for e in selection}
    missing_gold = [c for c in sorted(gold) if c not in selected_codes]
    for code in missing_gold:
        pooled = next((e for e in pool if e.code == code), None)
        if pooled is not None:
            pool.remove(pooled)
            forced = pooled
        elif code in gold_texts:
            forced = entry(code, gold_texts[code], len(entries) + 1 + code)
        else:
            raise ValueError(f"no text available for gold section {code}")
        non_gold = [e for e in selection if not e.is_gold]
        if len(selection) >= k and non_gold:
            victim = max(non_gold, key=lambda e: e.rank)
            selection.remove(victim)
        selection.append(forced)

    gold_total = question_tokens + sum(e.tokens for e in selection if e.is_gold)
    if gold_total > budget:
        raise PromptBudgetError("gold sections alone exceed the budget", gold_total - budget)

    replacements = 0

    def additive_total() -> int:
        return question_tokens + sum(e.tokens for e in selection)

    def trim_once() -> bool:
        """One replace step: drop the longest non-gold, refill if possible.

        Returns False when only gold remains (caller decides whether that is
        an overflow)."""
        nonlocal replacements
        non_gold = [e for e in selection if not e.is_gold]
        if not non_gold:
            return False
        victim = max(non_gold, key=lambda e: (e.tokens, e.rank))
        selection.remove(victim)
        replacements += 1
        slack = budget - additive_total()
        for cand in pool:
            if cand.tokens <= slack:
                pool.remove(cand)
                selection.append(cand)
                break
        return True

    while additive_total() > budget:
        if not trim_once():
            raise PromptBudgetError(
                "gold sections alone exceed the budget", additive_total() - budget
            )

    # Authoritative whole-prompt count; re-trim if a non-additive counter
    # makes the rendered whole exceed the budget.
    def rendered() -> tuple[str, int]:
        ordered = sorted(selection, key=lambda e: (e.rank, e.code))
        text = render_prompt(question, [PromptSection(e.code, e.text) for e in ordered])
        return text, counter.count(text)

    text, total = rendered()
    while total > budget:
        if not trim_once():
            raise PromptBudgetError("gold sections alone exceed the budget", total - budget)
        text, total = rendered()

    ordered = sorted(selection, key=lambda e: (e.rank, e.code))
    return PromptBundle(
        text=text,
        included_codes=[e.code for e in ordered],
        token_count=total,
        replacements_made=replacements,
    )
