"""Batch scoring engine shared by the CLI and the HTTP service.

One code path scores a rollout group end to end — parse, citation cascade,
mode components, composition, group advantages, optional loss — so service
responses are bit-identical to library-direct computation on the same
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .answers import (
    EmbedderProtocol,
    JudgeProtocol,
    MissingComponentError,
    MockJudge,
    RewardBreakdown,
    RewardMode,
    consistency_reward,
    coverage_reward,
    judge_labels,
    total_reward,
)
from .citation import citation_cascade
from .embedding import HashEmbedder, HeadWeights
from .grpo import GrpoConfig, GrpoLossDiagnostics, RolloutGroup, group_advantages, grpo_loss
from .similarity import multi_head_similarity
from .structured import BlockOrder, parse_response


@dataclass
class GroupRequest:
    """One prompt's rollouts plus everything needed to score them."""

    prompt_id: str
    completions: list[str]
    gold_citations: set[int]
    context_codes: set[int]
    reference_answer: str | None = None
    question: str = ""
    logp_new: list[float] | None = None
    logp_old: list[float] | None = None
    logp_ref: list[float] | None = None


@dataclass
class GroupScores:
    prompt_id: str
    breakdowns: list[RewardBreakdown]
    advantages: list[float]
    loss: float | None = None
    loss_diagnostics: GrpoLossDiagnostics | None = None


class RewardEngine:
    """Scores rollout groups under one reward mode with fixed backends."""

    def __init__(
        self,
        mode: RewardMode,
        weights: HeadWeights | None = None,
        order: BlockOrder = BlockOrder.REASONING_ANSWER_CITATION,
        embedder: EmbedderProtocol | None = None,
        judge: JudgeProtocol | None = None,
        grpo: GrpoConfig | None = None,
    ):
        self.mode = mode
        self.weights = weights or HeadWeights()
        self.order = order
        self.embedder = embedder if embedder is not None else HashEmbedder()
        self.judge = judge if judge is not None else MockJudge()
        self.grpo = grpo or GrpoConfig()

    def score_group(self, request: GroupRequest) -> GroupScores:
        if len(request.completions) < 2:
            raise MissingComponentError(
                "a rollout group needs at least 2 completions for advantages"
            )
        if (self.mode.uses_semantic or self.mode.uses_judge) and (
            request.reference_answer is None
        ):
            raise MissingComponentError(
                f"mode {self.mode.value} requires reference_answer"
            )
        for name in ("logp_new", "logp_old", "logp_ref"):
            logp = getattr(request, name)
            if logp is not None and len(logp) != len(request.completions):
                raise MissingComponentError(f"{name} must align with completions")
        if (request.logp_new is None) != (request.logp_old is None):
            raise MissingComponentError("logp_new and logp_old must be supplied together")

        parses = [parse_response(text, self.order) for text in request.completions]
        cascades = [
            citation_cascade(parsed, diag, request.context_codes, request.gold_citations)
            for parsed, diag in parses
        ]

        semantics: list[float | None] = [None] * len(parses)
        if self.mode.uses_semantic:
            # One embedder call per group: the reference plus every parsed answer.
            answers = [p.answer for p, _ in parses if p is not None]
            bundles = self.embedder.embed([request.reference_answer or ""] + answers)
            ref_bundle, answer_bundles = bundles[0], bundles[1:]
            bundle_iter = iter(answer_bundles)
            for i, (parsed, _) in enumerate(parses):
                if parsed is None:
                    semantics[i] = 0.0
                else:
                    semantics[i] = multi_head_similarity(
                        next(bundle_iter), ref_bundle, self.weights
                    )

        coverages: list[float | None] = [None] * len(parses)
        consistencies: list[float | None] = [None] * len(parses)
        if self.mode.uses_judge:
            for i, (parsed, _) in enumerate(parses):
                generated = parsed.answer if parsed is not None else ""
                cov, con = judge_labels(
                    request.question, generated, request.reference_answer or "", self.judge
                )
                coverages[i] = coverage_reward(cov)
                consistencies[i] = consistency_reward(con)

        breakdowns = [
            total_reward(self.mode, cascade, semantics[i], coverages[i], consistencies[i])
            for i, cascade in enumerate(cascades)
        ]
        advantages = group_advantages([b.total for b in breakdowns], self.grpo.std_floor)

        loss = None
        diagnostics = None
        if request.logp_new is not None and request.logp_old is not None:
            loss, diagnostics = grpo_loss(
                RolloutGroup(
                    prompt_id=request.prompt_id,
                    rewards=[b.total for b in breakdowns],
                    logp_new=request.logp_new,
                    logp_old=request.logp_old,
                    logp_ref=request.logp_ref,
                ),
                self.grpo,
            )

        return GroupScores(
            prompt_id=request.prompt_id,
            breakdowns=breakdowns,
            advantages=advantages,
            loss=loss,
            loss_diagnostics=diagnostics,
        )

    def score_groups(self, requests: list[GroupRequest]) -> list[GroupScores]:
        return [self.score_group(r) for r in requests]
