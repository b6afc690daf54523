"""Group-relative advantages, the clipped surrogate loss, and a desk-scale
bandit trainer that demonstrates the gated rewards are a learnable signal.

Advantages normalize each rollout's reward against its own group:

    a_i = (r_i - mean(r)) / max(std(r), std_floor)

with population std, and a degenerate (near-zero-variance) group yielding
exactly zero advantages. The loss is the standard clipped-ratio surrogate
over sequence-level log-probabilities, with an optional KL penalty against
a reference policy. No length normalization is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .answers import MockJudge, RewardMode, semantic_reward, total_reward
from .answers import coverage_reward as _coverage_value
from .answers import consistency_reward as _consistency_value
from .citation import citation_cascade
from .embedding import HashEmbedder, HeadWeights
from .structured import BlockOrder, ParsedResponse, parse_response, render_response


@dataclass
class GrpoConfig:
    clip_epsilon: float = 0.2
    kl_beta: float = 0.0
    std_floor: float = 1e-8
    group_size: int = 10


@dataclass
class RolloutGroup:
    """Rewards (and optionally log-probs) for one prompt's G rollouts."""

    prompt_id: str
    rewards: list[float]
    logp_new: list[float] | None = None
    logp_old: list[float] | None = None
    logp_ref: list[float] | None = None


def group_advantages(rewards: list[float], std_floor: float = 1e-8) -> list[float]:
    """Normalize a reward group to zero mean and unit (population) std.

    Groups need at least two rollouts; a group whose std falls below the
    floor produces all-zero advantages.
    """
    if len(rewards) < 2:
        raise ValueError("advantage normalization needs a group of at least 2 rewards")
    arr = np.asarray(rewards, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("rewards must be finite")
    std = float(arr.std())
    if std < std_floor:
        return [0.0] * len(rewards)
    mean = float(arr.mean())
    return [(r - mean) / std for r in arr.tolist()]


@dataclass
class GrpoLossDiagnostics:
    advantages: list[float]
    ratios: list[float]
    clipped: list[bool]
    surrogate_terms: list[float]
    kl_terms: list[float]


def grpo_loss(group: RolloutGroup, cfg: GrpoConfig) -> tuple[float, GrpoLossDiagnostics]:
    """Clipped surrogate loss for one rollout group.

    Per rollout: ratio = exp(logp_new - logp_old), term = min(ratio * a,
    clip(ratio, 1-eps, 1+eps) * a); loss = -mean(term) + kl_beta * mean(kl)
    where kl = exp(logp_ref - logp_new) - (logp_ref - logp_new) - 1 when a
    reference policy is supplied.
    """
    if group.logp_new is None or group.logp_old is None:
        raise ValueError("grpo_loss requires logp_new and logp_old")
    n = len(group.rewards)
    if len(group.logp_new) != n or len(group.logp_old) != n:
        raise ValueError("log-prob arrays must match the reward count")
    if group.logp_ref is not None and len(group.logp_ref) != n:
        raise ValueError("logp_ref must match the reward count")

    advantages = group_advantages(group.rewards, cfg.std_floor)
    lo, hi = 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon

    ratios: list[float] = []
    clipped: list[bool] = []
    terms: list[float] = []
    kls: list[float] = []
    for i in range(n):
        ratio = math.exp(group.logp_new[i] - group.logp_old[i])
        unclipped = ratio * advantages[i]
        capped = min(max(ratio, lo), hi) * advantages[i]
        term = min(unclipped, capped)
        ratios.append(ratio)
        clipped.append(capped < unclipped)
        terms.append(term)
        if group.logp_ref is not None:
            delta = group.logp_ref[i] - group.logp_new[i]
            kls.append(math.exp(delta) - delta - 1.0)
        else:
            kls.append(0.0)

    loss = -sum(terms) / n + cfg.kl_beta * (sum(kls) / n)
    return loss, GrpoLossDiagnostics(
        advantages=advantages,
        ratios=ratios,
        clipped=clipped,
        surrogate_terms=terms,
        kl_terms=kls,
    )


@dataclass
class ToyBanditSpec:
    """A citation bandit: candidate citation sets over a small code universe.

    Every action renders a well-formed completion whose citations are the
    action's codes; the configured reward mode scores it against the gold
    set and context. The trainer is deterministic given the seed.
    """

    actions: list[tuple[int, ...]]
    gold: frozenset[int]
    context: frozenset[int]
    mode: RewardMode = RewardMode.SEMANTIC
    learning_rate: float = 0.1
    iterations: int = 200
    seed: int = 69420
    group_size: int = 10
    answer_text: str = "The cited sections govern the disputed conduct."
    reference_answer: str = "The cited sections govern the disputed conduct."
    order: BlockOrder = BlockOrder.REASONING_ANSWER_CITATION

    def __post_init__(self) -> None:
        if not 1 <= len(self.actions) <= 64:
            raise ValueError("action space must have between 1 and 64 actions")


@dataclass
class CurvePoint:
    iteration: int
    expected_reward: float
    entropy: float


def default_action_space(
    gold: frozenset[int], context: frozenset[int]
) -> list[tuple[int, ...]]:
    """Eight deterministic candidate citation sets around the gold set."""
    if not (context | gold):
        raise ValueError("context and gold cannot both be empty")
    gold_sorted = tuple(sorted(gold))
    others = sorted(context - gold)
    outside = max(context | gold) + 1
    partial_gold = gold_sorted[1:] if len(gold_sorted) > 1 else gold_sorted[:1]
    actions = [
        gold_sorted,
        gold_sorted[:1],
        partial_gold,
        tuple(sorted(gold | set(others[:1]))),
        tuple(others[:2]) if len(others) >= 2 else tuple(others[:1]),
        (outside,),
        (),
        tuple(sorted(context)),
    ]
    # Dedup while keeping order; pad with singleton context codes if needed.
    seen: set[tuple[int, ...]] = set()
    unique: list[tuple[int, ...]] = []
    for a in actions:
        if a not in seen:
            seen.add(a)
            unique.append(a)
    for code in others:
        if len(unique) >= 8:
            break
        cand = (code,)
        if cand not in seen:
            seen.add(cand)
            unique.append(cand)
    return unique[:8]


def _score_action(spec: ToyBanditSpec, action: tuple[int, ...], embedder, judge) -> float:
    rendered = render_response(
        ParsedResponse(
            reasoning="Considering the provided sections.",
            answer=spec.answer_text,
            citations=list(action),
            order=spec.order,
        )
    )
    parsed, diag = parse_response(rendered, spec.order)
    cascade = citation_cascade(parsed, diag, spec.context, spec.gold)
    semantic = None
    coverage = None
    consistency = None
    if spec.mode.uses_semantic:
        semantic = semantic_reward(
            spec.answer_text,
            spec.reference_answer,
            embedder,
            HeadWeights(),
            format_pass=cascade.format_pass,
        )
    if spec.mode.uses_judge:
        cov_label, con_label = judge.labels("", spec.answer_text, spec.reference_answer)
        coverage = _coverage_value(cov_label)
        consistency = _consistency_value(con_label)
    return total_reward(spec.mode, cascade, semantic, coverage, consistency).total


def train_toy_bandit(spec: ToyBanditSpec) -> list[CurvePoint]:
    """Train a softmax policy over the action space with group-relative
    policy-gradient steps; returns the per-iteration learning curve."""
    embedder = HashEmbedder()
    judge = MockJudge()
    # Rewards are pure in the action, so score each action once.
    action_rewards = np.asarray(
        [_score_action(spec, a, embedder, judge) for a in spec.actions], dtype=np.float64
    )

    n = len(spec.actions)
    logits = np.zeros(n, dtype=np.float64)
    rng = np.random.default_rng(spec.seed)
    curve: list[CurvePoint] = []

    for it in range(1, spec.iterations + 1):
        exps = np.exp(logits - logits.max())
        probs = exps / exps.sum()

        if spec.learning_rate != 0.0:
            sampled = rng.choice(n, size=spec.group_size, p=probs)
            advantages = group_advantages(
                [float(action_rewards[i]) for i in sampled]
            )
            # Score-function gradient summed over the group:
            # d log softmax / d logits = onehot(action) - probs.
            grad = np.zeros(n, dtype=np.float64)
            for idx, adv in zip(sampled, advantages):
                grad -= adv * probs
                grad[idx] += adv
            logits += spec.learning_rate * grad

            exps = np.exp(logits - logits.max())
            probs = exps / exps.sum()

        expected = float(probs @ action_rewards)
        entropy = float(-(probs * np.log(np.clip(probs, 1e-300, None))).sum())
        curve.append(CurvePoint(iteration=it, expected_reward=expected, entropy=entropy))

    return curve
