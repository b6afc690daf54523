"""Parsing and rendering of the tagged completion format.

Completions carry three blocks — reasoning, answer and a citation list of
integer law codes — in one of two orders (citation block last or citation
block before the answer). Matching is exact-string on the tag literals;
model output is only XML-like, so no real XML parser is used. Text outside
the recognized blocks (preambles, chatter) is ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

REASONING_TAG = "reasoning"
ANSWER_TAG = "answer"
CITATION_TAG = "citation"
LAW_CODE_TAG = "law_code"

_LAW_CODE_RE = re.compile(r"<law_code>(.*?)</law_code>", re.DOTALL)
_CONTEXT_CODE_RE = re.compile(r"<law_code>(.*?)</law_code><context>", re.DOTALL)
_NONNEG_INT_RE = re.compile(r"[0-9]+")

# Number of equal-weight format checks behind the graded score:
# one per block present exactly once, one for order, one for parseable codes.
FORMAT_CHECKS = 5


class BlockOrder(Enum):
    """Order of the three blocks in a completion."""

    REASONING_ANSWER_CITATION = ("reasoning", "answer", "citation")
    REASONING_CITATION_ANSWER = ("reasoning", "citation", "answer")

    @property
    def tags(self) -> tuple[str, str, str]:
        return self.value


@dataclass
class ParsedResponse:
    """A fully parsed completion. Duplicate citations are preserved."""

    reasoning: str
    answer: str
    citations: list[int]
    order: BlockOrder = BlockOrder.REASONING_ANSWER_CITATION


@dataclass
class FormatDiagnostics:
    """Per-check outcome of a parse attempt.

    graded_score is the fraction of satisfied checks; it is 1.0 exactly when
    the full parse succeeded.
    """

    tags_found: dict[str, bool] = field(default_factory=dict)
    order_ok: bool = False
    codes_parseable: bool = False
    graded_score: float = 0.0

    @property
    def is_full_parse(self) -> bool:
        return self.graded_score == 1.0


def _locate_block(text: str, tag: str) -> tuple[bool, str | None, int]:
    """Find a block that occurs exactly once.

    Returns (found_exactly_once, inner_text, opening_position). Inner text is
    raw (no whitespace stripping).
    """
    open_tag = f"<{tag}>"
    close_tag = f"</{tag}>"
    if text.count(open_tag) != 1 or text.count(close_tag) != 1:
        return False, None, -1
    start = text.index(open_tag)
    end = text.index(close_tag)
    if end < start:
        return False, None, -1
    inner = text[start + len(open_tag) : end]
    return True, inner, start


def _parse_codes(citation_inner: str) -> tuple[bool, list[int]]:
    """Extract law codes from the citation block, document order, duplicates kept."""
    codes: list[int] = []
    for match in _LAW_CODE_RE.finditer(citation_inner):
        raw = match.group(1).strip()
        if not _NONNEG_INT_RE.fullmatch(raw):
            return False, []
        codes.append(int(raw))
    return True, codes


def parse_response(
    text: str, order: BlockOrder = BlockOrder.REASONING_ANSWER_CITATION
) -> tuple[ParsedResponse | None, FormatDiagnostics]:
    """Parse a raw completion. Total: never raises, diagnostics always returned.

    A ParsedResponse is returned only when all three blocks occur exactly
    once, in the expected order, and every law code parses as a non-negative
    integer.
    """
    found: dict[str, bool] = {}
    inners: dict[str, str | None] = {}
    positions: dict[str, int] = {}
    for tag in (REASONING_TAG, ANSWER_TAG, CITATION_TAG):
        ok, inner, pos = _locate_block(text, tag)
        found[tag] = ok
        inners[tag] = inner
        positions[tag] = pos

    expected = order.tags
    order_ok = all(found.values()) and (
        positions[expected[0]] < positions[expected[1]] < positions[expected[2]]
    )

    codes: list[int] = []
    codes_parseable = False
    if found[CITATION_TAG]:
        codes_parseable, codes = _parse_codes(inners[CITATION_TAG] or "")

    satisfied = sum(found.values()) + int(order_ok) + int(codes_parseable)
    diag = FormatDiagnostics(
        tags_found=found,
        order_ok=order_ok,
        codes_parseable=codes_parseable,
        graded_score=satisfied / FORMAT_CHECKS,
    )

    if satisfied != FORMAT_CHECKS:
        return None, diag
    parsed = ParsedResponse(
        reasoning=inners[REASONING_TAG] or "",
        answer=inners[ANSWER_TAG] or "",
        citations=codes,
        order=order,
    )
    return parsed, diag


_STRUCTURAL_LITERALS = tuple(
    f"<{t}>" for t in (REASONING_TAG, ANSWER_TAG, CITATION_TAG, LAW_CODE_TAG)
) + tuple(f"</{t}>" for t in (REASONING_TAG, ANSWER_TAG, CITATION_TAG, LAW_CODE_TAG))


def render_response(r: ParsedResponse) -> str:
    """Render blocks in r.order; inverse of parse_response for well-formed input.

    Raises ValueError when the free text embeds structural tag literals or a
    citation is negative — such a response cannot round-trip.
    """
    for name, value in (("reasoning", r.reasoning), ("answer", r.answer)):
        for literal in _STRUCTURAL_LITERALS:
            if literal in value:
                raise ValueError(f"{name} text contains structural tag {literal!r}")
    if any(c < 0 for c in r.citations):
        raise ValueError("law codes must be non-negative")

    citation_lines = "".join(f"<law_code>{c}</law_code>\n" for c in r.citations)
    blocks = {
        REASONING_TAG: f"<reasoning>{r.reasoning}</reasoning>",
        ANSWER_TAG: f"<answer>{r.answer}</answer>",
        CITATION_TAG: f"<citation>\n{citation_lines}</citation>",
    }
    return "\n".join(blocks[tag] for tag in r.order.tags)


class ContextCodeError(ValueError):
    """A law_code span in a prompt context did not parse as a non-negative integer."""

    def __init__(self, span: str, position: int):
        self.span = span
        self.position = position
        super().__init__(
            f"malformed law_code {span!r} at offset {position} in prompt context"
        )


def extract_context_codes(prompt: str) -> set[int]:
    """Collect the law codes of all context sections present in a prompt.

    Matches the `<law_code>N</law_code><context>` layout used when prompts
    are built; returns a set (duplicates collapse).
    """
    codes: set[int] = set()
    for match in _CONTEXT_CODE_RE.finditer(prompt):
        raw = match.group(1).strip()
        if not _NONNEG_INT_RE.fullmatch(raw):
            raise ContextCodeError(match.group(1), match.start(1))
        codes.add(int(raw))
    return codes
