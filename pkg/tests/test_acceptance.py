"""Acceptance suite: one test per exit criterion, each printed as a
pass/fail line in the terminal summary (see conftest)."""

import random
import time
from itertools import combinations

import numpy as np

from conftest import garble, random_parsed_response
from nitireward.answers import RewardMode, total_reward
from nitireward.citation import citation_cascade, citation_f1
from nitireward.citation import CitationRewardBreakdown
from nitireward.embedding import HashEmbedder, HeadWeights
from nitireward.evaluation import gains_pct, joint_score
from nitireward.grpo import ToyBanditSpec, default_action_space, group_advantages, train_toy_bandit
from nitireward.prompting import (
    HeuristicTokenCounter,
    PromptBudgetError,
    PromptSection,
    build_prompt,
    render_prompt,
)
from nitireward.retrieval import CorpusSection, retrieve_topk, score_section
from nitireward.similarity import fuse
from nitireward.structured import BlockOrder, parse_response, render_response

from reference_results import ALL_SECTIONS, WRONG_BASE_CELLS


def test_reported_table_arithmetic():
    """Joint = mean of the three metrics within 5e-4 on every published row;
    recomputed gains match the printed ones within 0.1pp. Runs < 1s."""
    start = time.perf_counter()
    checked_rows = 0
    checked_gains = 0
    for dataset, rows in ALL_SECTIONS.items():
        base = None
        for label, f1, cov, con, joint, gains in rows:
            assert abs(joint_score(f1, cov, con) - joint) < 5e-4, (dataset, label)
            checked_rows += 1
            if gains is None:
                if label.endswith("instruct"):
                    base = (f1, cov, con, joint)
                continue
            for metric_idx, (base_v, new_v, printed) in enumerate(
                zip(base, (f1, cov, con, joint), gains)
            ):
                computed = gains_pct(base_v, new_v)
                wrong_base = WRONG_BASE_CELLS.get((dataset, label, metric_idx))
                if wrong_base is not None:
                    # The printed cell used a neighboring row as its base;
                    # both readings are pinned so the anomaly stays visible.
                    assert abs(gains_pct(wrong_base, new_v) - printed) <= 0.1
                    assert computed == 8.91
                else:
                    assert abs(computed - printed) <= 0.1, (dataset, label, metric_idx)
                checked_gains += 1
    assert checked_rows == 30
    assert checked_gains == 72
    assert time.perf_counter() - start < 1.0


def test_citation_f1_counting_oracle():
    """All 1024 subset pairs over a 5-code universe match an independent
    counting oracle exactly. Runs < 1s."""
    start = time.perf_counter()
    universe = [1, 2, 3, 4, 5]
    subsets = [set(c) for n in range(6) for c in combinations(universe, n)]
    assert len(subsets) ** 2 == 1024
    for cited in subsets:
        for gold in subsets:
            tp = sum(1 for c in cited if any(c == g for g in gold))
            p = tp / len(cited) if cited else 0.0
            r = tp / len(gold) if gold else 0.0
            expected = 2 * p * r / (p + r) if p + r > 0 else 0.0
            assert citation_f1(cited, gold).f1 == expected, (cited, gold)
    assert time.perf_counter() - start < 1.0


def test_reward_gating_on_garbled_outputs():
    """On 10,000 random parsed/garbled completions: a positive
    non-hallucination component implies a full parse, and a positive F1
    component implies both gates passed."""
    rng = random.Random(69420)
    for _ in range(10_000):
        order = rng.choice(list(BlockOrder))
        text = garble(rng, render_response(random_parsed_response(rng, order)))
        context = {rng.randint(0, 9) for _ in range(rng.randint(0, 6))}
        gold = {rng.randint(0, 9) for _ in range(rng.randint(0, 4))}
        parsed, diag = parse_response(text, order)
        b = citation_cascade(parsed, diag, context, gold)
        if b.non_hallucination > 0:
            assert b.format_pass and parsed is not None and diag.graded_score == 1.0
        if b.citation_f1 > 0:
            assert b.format_pass and b.halluc_pass


def test_advantage_normalization_properties():
    """Random 10-reward groups normalize to mean 0, population std 1 within
    1e-9; constant groups give zeros; shift/scale invariance is exact."""
    rng = np.random.default_rng(69420)
    for _ in range(200):
        rewards = rng.uniform(0.0, 5.5, size=10).tolist()
        adv = np.asarray(group_advantages(rewards))
        assert abs(adv.mean()) < 1e-9
        assert abs(adv.std() - 1.0) < 1e-9

    assert group_advantages([2.5] * 10) == [0.0] * 10

    # Integer rewards summing to a multiple of the group size and a
    # power-of-two scale keep every float step exact, so the invariance
    # assertions are bitwise.
    rewards = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 15.0]
    base = group_advantages(rewards)
    assert group_advantages([r + 7.0 for r in rewards]) == base
    assert group_advantages([r * 4.0 for r in rewards]) == base
    assert group_advantages([r * 0.5 + 3.0 for r in rewards]) == base


def test_toy_grpo_convergence():
    """8-action citation bandit with the gold set present, semantic mode,
    seed 69420, 200 iterations: final expected reward >= 0.9x the best
    action's reward and the 10-iteration smoothed curve is monotone.
    Runs < 10s. (Desk-scale stand-in for full training runs.)"""
    start = time.perf_counter()
    gold, context = frozenset({2, 5}), frozenset({1, 2, 3, 4, 5})
    actions = default_action_space(gold, context)
    assert len(actions) == 8 and tuple(sorted(gold)) in actions

    spec = ToyBanditSpec(
        actions=actions,
        gold=gold,
        context=context,
        mode=RewardMode.SEMANTIC,
        iterations=200,
        seed=69420,
    )
    curve = train_toy_bandit(spec)
    assert len(curve) == 200

    embedder = HashEmbedder()
    from nitireward.grpo import _score_action
    from nitireward.answers import MockJudge

    max_attainable = max(_score_action(spec, a, embedder, MockJudge()) for a in actions)
    assert curve[-1].expected_reward >= 0.9 * max_attainable

    rewards = [p.expected_reward for p in curve]
    smoothed = np.convolve(rewards, np.ones(10) / 10, mode="valid")
    assert (np.diff(smoothed) >= -1e-9).all()
    assert time.perf_counter() - start < 10.0


def test_prompt_builder_invariants():
    """1,000 randomized corpora (sections of 50-3,000 tokens, k=10, budget
    8192): every successful build fits the budget and retains all gold;
    gold-only overflows raise the documented error. Runs < 5s."""
    start = time.perf_counter()
    rng = random.Random(69420)
    counter = HeuristicTokenCounter()
    question = "Which sections govern the disputed filing?"
    overflows = 0
    for _ in range(1_000):
        n = rng.randint(4, 15)
        ranked = [
            PromptSection(code, "x" * (rng.randint(50, 3000) * 3 - 40))
            for code in range(1, n + 1)
        ]
        gold = {rng.randint(1, n) for _ in range(rng.randint(0, 4))}
        try:
            bundle = build_prompt(question, ranked, gold, budget=8192, k=10, counter=counter)
        except PromptBudgetError as err:
            gold_only = render_prompt(
                question, [s for s in ranked if s.code in gold]
            )
            assert counter.count(gold_only) > 8192  # only legitimate overflow raises
            assert err.overflow > 0
            overflows += 1
            continue
        assert bundle.token_count <= 8192
        assert gold <= set(bundle.included_codes)
    assert overflows > 0  # the generator must exercise the error path
    assert time.perf_counter() - start < 5.0


def test_fusion_correctness():
    """retrieve_topk equals the brute-force sort oracle on 200 random
    corpora; heads (1.0, 0.5, 0.5) with weights (0.4, 0.2, 0.4) fuse to 0.7
    exactly."""
    assert fuse(1.0, 0.5, 0.5, HeadWeights(0.4, 0.2, 0.4)) == 0.7

    rng = random.Random(69420)
    vocab = "law tax duty share sale deed court fee transfer filing".split()
    embedder = HashEmbedder(dense_dim=16, token_dim=4)
    w = HeadWeights()
    for _ in range(200):
        n = rng.randint(2, 14)
        texts = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(2, 8)))
            for _ in range(n)
        ]
        bundles = embedder.embed(texts + ["duty on share transfer"])
        corpus = [
            CorpusSection(code=i, text=t, embedding=b)
            for i, (t, b) in enumerate(zip(texts, bundles))
        ]
        query = bundles[-1]
        k = rng.randint(1, 12)
        ranked = retrieve_topk(query, corpus, k=k, w=w)
        oracle = sorted(
            (score_section(query, s, w) for s in corpus),
            key=lambda r: (-r.fused, r.code),
        )[: min(k, n)]
        assert [(r.code, r.fused) for r in ranked] == [(o.code, o.fused) for o in oracle]


def test_parser_round_trip():
    """parse(render(r)) == r for 1,000 random responses in each block order,
    the citation-first order included."""
    rng = random.Random(69420)
    for order in BlockOrder:
        for _ in range(1_000):
            original = random_parsed_response(rng, order)
            parsed, diag = parse_response(render_response(original), order)
            assert diag.graded_score == 1.0
            assert parsed == original


def test_reward_mode_bounds():
    """Constructed maximizing inputs reach each mode's bound exactly:
    2.5 / 3.5 / 4.5 / 5.5 for citation-only / semantic / cov-con / combined.
    (The cov/con ceiling is the constructive maximum: citation subtotal 2.5
    plus coverage 1.0 plus consistency 1.0.)"""
    best_citation = CitationRewardBreakdown(
        format=1.0,
        format_pass=True,
        non_hallucination=0.5,
        halluc_pass=True,
        citation_f1=1.0,
        subtotal=2.5,
    )
    maxima = {
        RewardMode.CITATION_ONLY: 2.5,
        RewardMode.SEMANTIC: 3.5,
        RewardMode.COV_CON: 4.5,
        RewardMode.COMBINED: 5.5,
    }
    for mode, expected in maxima.items():
        breakdown = total_reward(
            mode,
            best_citation,
            semantic=1.0 if mode.uses_semantic else None,
            coverage=1.0 if mode.uses_judge else None,
            consistency=1.0 if mode.uses_judge else None,
        )
        assert breakdown.total == expected, mode

    # Exhaustive oracle over the discrete component grids confirms the
    # ceilings are attained and never exceeded.
    for mode, expected in maxima.items():
        best = 0.0
        for fmt in (0.0, 0.4, 1.0):
            fmt_pass = fmt == 1.0
            for halluc in ((0.0, 0.5) if fmt_pass else (0.0,)):
                for f1 in ((0.0, 0.5, 1.0) if halluc else (0.0,)):
                    citation = CitationRewardBreakdown(
                        fmt, fmt_pass, halluc, halluc > 0, f1, fmt + halluc + f1
                    )
                    for sem in (0.0, 1.0) if mode.uses_semantic else (None,):
                        for cov in (0.0, 0.5, 1.0) if mode.uses_judge else (None,):
                            for con in (0.0, 1.0) if mode.uses_judge else (None,):
                                best = max(
                                    best,
                                    total_reward(mode, citation, sem, cov, con).total,
                                )
        assert best == expected, mode
