"""Multi-head similarity: dense, sparse and late-interaction heads.

Head semantics:

  dense  = dot(a.dense, b.dense), clamped to [0, 1]
  sparse = min(1, sum of weight products over shared term ids)
  late   = mean over a's token vectors of the max cosine against b's,
           negatives clamped to 0 (asymmetric in a/b by construction)

and the fused score is the HeadWeights-weighted sum, clamped to [0, 1].
The late head is the hot loop of corpus scoring; it deliberately stays on
numpy matmul, which lowers to BLAS — a hand-compiled kernel cannot reorder
float summation under strict IEEE semantics and measures slower.
"""

from __future__ import annotations

import numpy as np

from .embedding import EmbeddingBundle, HeadWeights


def maxsim(query_tokens: np.ndarray, doc_tokens: np.ndarray) -> float:
    """Mean over query tokens of the best dot product against doc tokens.

    Per-token maxima are clamped at zero; empty inputs score 0.
    """
    if query_tokens.shape[0] == 0 or doc_tokens.shape[0] == 0:
        return 0.0
    sims = query_tokens @ doc_tokens.T
    best = np.maximum(sims.max(axis=1), 0.0)
    return float(best.mean())


def dense_score(a: EmbeddingBundle, b: EmbeddingBundle) -> float:
    return min(1.0, max(0.0, float(np.dot(a.dense, b.dense))))


def sparse_dot(a: dict[int, float], b: dict[int, float]) -> float:
    if len(b) < len(a):
        a, b = b, a
    return sum((w * b[t] for t, w in a.items() if t in b), 0.0)


def sparse_score(a: EmbeddingBundle, b: EmbeddingBundle) -> float:
    return min(1.0, sparse_dot(a.sparse, b.sparse))


def late_score(a: EmbeddingBundle, b: EmbeddingBundle) -> float:
    if a.tokens.shape[0] == 0 or b.tokens.shape[0] == 0:
        return 0.0
    if a.tokens.shape[1] != b.tokens.shape[1]:
        raise ValueError(
            f"token vector dims differ: {a.tokens.shape[1]} vs {b.tokens.shape[1]}"
        )
    return maxsim(a.tokens, b.tokens)


def fuse(dense: float, sparse: float, late: float, w: HeadWeights) -> float:
    score = w.dense_w * dense + w.sparse_w * sparse + w.late_w * late
    return min(1.0, max(0.0, score))


def multi_head_similarity(
    a: EmbeddingBundle, b: EmbeddingBundle, w: HeadWeights | None = None
) -> float:
    """Weighted three-head similarity in [0, 1]."""
    w = w or HeadWeights()
    return fuse(dense_score(a, b), sparse_score(a, b), late_score(a, b), w)
