"""Answer-quality rewards and total-reward composition.

Two quality signals exist: an embedding similarity between the generated
and reference answers (cheap, used for online training) and judge-assigned
coverage/contradiction labels (expensive). Four composition modes ablate
them: citation-only, semantic, cov/con, and the naive combined sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .citation import MAX_CITATION_SUBTOTAL, CitationRewardBreakdown
from .embedding import EmbeddingBundle, HeadWeights
from .similarity import multi_head_similarity


class CoverageLabel(Enum):
    NONE = "none"
    PARTIAL = "partial"
    FULL = "full"

    @classmethod
    def parse(cls, value: str) -> "CoverageLabel":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown coverage label {value!r}") from None


class ContradictionLabel(Enum):
    CONTRADICTS = "contradicts"
    NO_CONTRADICTION = "no_contradiction"

    @classmethod
    def parse(cls, value: str) -> "ContradictionLabel":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown contradiction label {value!r}") from None


class RewardMode(Enum):
    CITATION_ONLY = "citation_only"
    SEMANTIC = "semantic"
    COV_CON = "cov_con"
    COMBINED = "combined"

    @classmethod
    def parse(cls, value: str) -> "RewardMode":
        try:
            return cls(value.strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown reward mode {value!r}") from None

    @property
    def uses_semantic(self) -> bool:
        return self in (RewardMode.SEMANTIC, RewardMode.COMBINED)

    @property
    def uses_judge(self) -> bool:
        return self in (RewardMode.COV_CON, RewardMode.COMBINED)


@dataclass
class RewardBreakdown:
    """Per-completion reward components plus the composed scalar."""

    citation: CitationRewardBreakdown
    semantic: float | None = None
    coverage: float | None = None
    consistency: float | None = None
    total: float = 0.0

    def to_json(self) -> dict:
        return {
            "format": self.citation.format,
            "format_pass": self.citation.format_pass,
            "non_hallucination": self.citation.non_hallucination,
            "halluc_pass": self.citation.halluc_pass,
            "citation_f1": self.citation.citation_f1,
            "subtotal": self.citation.subtotal,
            "semantic": self.semantic,
            "coverage": self.coverage,
            "consistency": self.consistency,
            "total": self.total,
        }


class EmbedderProtocol(Protocol):
    def embed(self, texts: list[str]) -> list[EmbeddingBundle]: ...


class JudgeProtocol(Protocol):
    def labels(
        self, question: str, generated: str, reference: str
    ) -> tuple[CoverageLabel, ContradictionLabel]: ...


class MockJudge:
    """Deterministic judge for tests and mock-backed serving.

    Exact match with the reference -> full coverage, no contradiction;
    empty generation -> no coverage, contradiction; anything else ->
    partial coverage, no contradiction.
    """

    def labels(
        self, question: str, generated: str, reference: str
    ) -> tuple[CoverageLabel, ContradictionLabel]:
        if generated == reference:
            return CoverageLabel.FULL, ContradictionLabel.NO_CONTRADICTION
        if generated == "":
            return CoverageLabel.NONE, ContradictionLabel.CONTRADICTS
        return CoverageLabel.PARTIAL, ContradictionLabel.NO_CONTRADICTION


def multi_head_answer_similarity(
    a: EmbeddingBundle, b: EmbeddingBundle, w: HeadWeights | None = None
) -> float:
    return multi_head_similarity(a, b, w)


def semantic_reward(
    gen_answer: str,
    ref_answer: str,
    embedder: EmbedderProtocol,
    w: HeadWeights | None = None,
    format_pass: bool = True,
) -> float:
    """Embedding similarity between generated and reference answers.

    Gated on a successful parse: a completion with no answer block earns 0
    without touching the embedder. Embedder failures propagate to the caller;
    they must never be silently scored as 0.
    """
    if not format_pass:
        return 0.0
    gen_bundle, ref_bundle = embedder.embed([gen_answer, ref_answer])
    return multi_head_similarity(gen_bundle, ref_bundle, w)


_COVERAGE_VALUE = {
    CoverageLabel.NONE: 0.0,
    CoverageLabel.PARTIAL: 0.5,
    CoverageLabel.FULL: 1.0,
}


def coverage_reward(label: CoverageLabel) -> float:
    return _COVERAGE_VALUE[label]


def consistency_reward(label: ContradictionLabel) -> float:
    """1.0 for a non-contradicting answer, 0.0 otherwise.

    Complements the contradiction score (reward + contradiction = 1) so the
    maximized quantity points away from contradictions.
    """
    return 1.0 if label is ContradictionLabel.NO_CONTRADICTION else 0.0


def contradiction_score(label: ContradictionLabel) -> float:
    return 1.0 if label is ContradictionLabel.CONTRADICTS else 0.0


def judge_labels(
    question: str, generated: str, reference: str, judge: JudgeProtocol
) -> tuple[CoverageLabel, ContradictionLabel]:
    """Ask the configured judge for coverage and contradiction labels."""
    return judge.labels(question, generated, reference)


class MissingComponentError(ValueError):
    """A reward mode requires a component that was not supplied."""


def total_reward(
    mode: RewardMode,
    citation: CitationRewardBreakdown,
    semantic: float | None = None,
    coverage: float | None = None,
    consistency: float | None = None,
) -> RewardBreakdown:
    """Compose the citation subtotal with the mode's answer components.

    Combined mode is the deliberately naive unweighted sum; no re-balancing
    is applied.
    """
    if mode.uses_semantic and semantic is None:
        raise MissingComponentError(f"mode {mode.value} requires a semantic score")
    if mode.uses_judge and (coverage is None or consistency is None):
        raise MissingComponentError(
            f"mode {mode.value} requires coverage and consistency scores"
        )

    breakdown = RewardBreakdown(citation=citation)
    total = citation.subtotal
    if mode.uses_semantic:
        breakdown.semantic = semantic
        total += semantic
    if mode.uses_judge:
        breakdown.coverage = coverage
        breakdown.consistency = consistency
        total += coverage + consistency
    breakdown.total = total
    return breakdown


def max_attainable_total(mode: RewardMode) -> float:
    """Upper bound of the composed reward for a mode."""
    total = MAX_CITATION_SUBTOTAL
    if mode.uses_semantic:
        total += 1.0
    if mode.uses_judge:
        total += _COVERAGE_VALUE[CoverageLabel.FULL]
        total += consistency_reward(ContradictionLabel.NO_CONTRADICTION)
    return total
