"""Gated citation rewards: format -> non-hallucination -> citation F1.

Downstream components are zeroed whenever an upstream gate fails: the
non-hallucination check requires a fully parsed completion, and the F1
component requires both the parse and the hallucination check to pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet

from .structured import FormatDiagnostics, ParsedResponse

NON_HALLUCINATION_VALUE = 0.5
MAX_CITATION_SUBTOTAL = 1.0 + NON_HALLUCINATION_VALUE + 1.0


@dataclass
class CitationScores:
    precision: float
    recall: float
    f1: float


@dataclass
class CitationRewardBreakdown:
    format: float
    format_pass: bool
    non_hallucination: float
    halluc_pass: bool
    citation_f1: float
    subtotal: float


def format_reward(diag: FormatDiagnostics) -> tuple[float, bool]:
    """Graded format score plus the hard pass flag (full parse only)."""
    return diag.graded_score, diag.is_full_parse


def non_hallucination_reward(
    cited: AbstractSet[int], context: AbstractSet[int], format_pass: bool
) -> tuple[float, bool]:
    """0.5 when every cited code was provided in the context, gated on format.

    An empty cited set passes (vacuous subset): refusing to cite is not
    hallucinating, though it earns no F1 later.
    """
    if not format_pass:
        return 0.0, False
    if cited <= context:
        return NON_HALLUCINATION_VALUE, True
    return 0.0, False


def citation_f1(cited: AbstractSet[int], gold: AbstractSet[int]) -> CitationScores:
    """Set precision/recall/F1 between cited and ground-truth codes."""
    overlap = len(cited & gold)
    precision = overlap / len(cited) if cited else 0.0
    recall = overlap / len(gold) if gold else 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return CitationScores(precision=precision, recall=recall, f1=f1)


def citation_cascade(
    parsed: ParsedResponse | None,
    diag: FormatDiagnostics,
    context: AbstractSet[int],
    gold: AbstractSet[int],
) -> CitationRewardBreakdown:
    """Run the full cascade for one completion.

    Citations are deduplicated here, at scoring time; the parser keeps
    duplicates so diagnostics can report them.
    """
    fmt_score, fmt_pass = format_reward(diag)
    cited = set(parsed.citations) if parsed is not None else set()

    halluc_score, halluc_pass = non_hallucination_reward(cited, context, fmt_pass)

    f1 = 0.0
    if fmt_pass and halluc_pass:
        f1 = citation_f1(cited, gold).f1

    return CitationRewardBreakdown(
        format=fmt_score,
        format_pass=fmt_pass,
        non_hallucination=halluc_score,
        halluc_pass=halluc_pass,
        citation_f1=f1,
        subtotal=fmt_score + halluc_score + f1,
    )
