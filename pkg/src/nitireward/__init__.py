"""Reward computation, retrieval fusion and evaluation for citation-sensitive
legal RAG: tagged-output parsing, gated citation rewards, answer-quality
rewards, group-relative advantages, budgeted prompt building, NitiBench-style
metrics, and a batch-scoring HTTP service."""

__version__ = "0.1.0"

from .answers import (
    ContradictionLabel,
    CoverageLabel,
    MockJudge,
    RewardBreakdown,
    RewardMode,
    consistency_reward,
    coverage_reward,
    judge_labels,
    max_attainable_total,
    semantic_reward,
    total_reward,
)
from .citation import (
    CitationRewardBreakdown,
    CitationScores,
    citation_cascade,
    citation_f1,
    format_reward,
    non_hallucination_reward,
)
from .embedding import DEFAULT_WEIGHTS, EmbeddingBundle, HashEmbedder, HeadWeights
from .evaluation import (
    EvalMetrics,
    EvalRecord,
    RunAggregate,
    aggregate_runs,
    corpus_stats,
    evaluate_record,
    evaluate_run,
    gains_pct,
    retriever_ceiling,
)
from .grpo import (
    GrpoConfig,
    RolloutGroup,
    ToyBanditSpec,
    default_action_space,
    group_advantages,
    grpo_loss,
    train_toy_bandit,
)
from .prompting import (
    HeuristicTokenCounter,
    PromptBudgetError,
    PromptBundle,
    PromptSection,
    build_prompt,
    render_context_block,
    render_prompt,
)
from .retrieval import CorpusSection, RetrievedSection, retrieve_topk, score_section
from .scoring import GroupRequest, GroupScores, RewardEngine
from .similarity import maxsim, multi_head_similarity
from .structured import (
    BlockOrder,
    FormatDiagnostics,
    ParsedResponse,
    extract_context_codes,
    parse_response,
    render_response,
)

__all__ = [
    "__version__",
    "BlockOrder",
    "CitationRewardBreakdown",
    "CitationScores",
    "ContradictionLabel",
    "CorpusSection",
    "CoverageLabel",
    "DEFAULT_WEIGHTS",
    "EmbeddingBundle",
    "EvalMetrics",
    "EvalRecord",
    "FormatDiagnostics",
    "GroupRequest",
    "GroupScores",
    "GrpoConfig",
    "HashEmbedder",
    "HeadWeights",
    "HeuristicTokenCounter",
    "MockJudge",
    "ParsedResponse",
    "PromptBudgetError",
    "PromptBundle",
    "PromptSection",
    "RetrievedSection",
    "RewardBreakdown",
    "RewardEngine",
    "RewardMode",
    "RolloutGroup",
    "RunAggregate",
    "ToyBanditSpec",
    "aggregate_runs",
    "build_prompt",
    "citation_cascade",
    "citation_f1",
    "consistency_reward",
    "corpus_stats",
    "coverage_reward",
    "default_action_space",
    "evaluate_record",
    "evaluate_run",
    "extract_context_codes",
    "format_reward",
    "gains_pct",
    "group_advantages",
    "grpo_loss",
    "judge_labels",
    "max_attainable_total",
    "maxsim",
    "multi_head_similarity",
    "non_hallucination_reward",
    "parse_response",
    "render_context_block",
    "render_prompt",
    "render_response",
    "retrieve_topk",
    "retriever_ceiling",
    "score_section",
    "semantic_reward",
    "total_reward",
    "train_toy_bandit",
]
