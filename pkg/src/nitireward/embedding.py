"""Embedding bundles and the deterministic offline embedder.

A bundle carries the three similarity heads: a unit-norm dense vector, a
sparse term->weight map, and a matrix of unit-norm token vectors for
late-interaction scoring. The hash embedder is the test/offline stand-in
for a real embedding service: hashed character 3-grams for the dense head,
whitespace term frequencies for the sparse head, and one vector per 8-char
window for the late head. All hashing goes through blake2b so bundles are
bit-identical across platforms and processes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

DENSE_DIM = 256
TOKEN_DIM = 64
NGRAM = 3
TOKEN_WINDOW = 8
_SPARSE_SPACE = 2**31
_UNIT_NORM_ATOL = 1e-6


@dataclass
class EmbeddingBundle:
    dense: np.ndarray
    sparse: dict[int, float]
    tokens: np.ndarray

    def validate(self) -> None:
        if abs(float(np.linalg.norm(self.dense)) - 1.0) > _UNIT_NORM_ATOL:
            raise ValueError("dense vector is not unit-norm")
        if any(w < 0 for w in self.sparse.values()):
            raise ValueError("sparse weights must be non-negative")
        if self.tokens.size:
            norms = np.linalg.norm(self.tokens, axis=1)
            if np.max(np.abs(norms - 1.0)) > _UNIT_NORM_ATOL:
                raise ValueError("token vectors must be unit-norm")

    def to_json(self) -> dict:
        return {
            "dense": self.dense.tolist(),
            "sparse": {str(k): v for k, v in self.sparse.items()},
            "tokens": self.tokens.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, token_dim: int = TOKEN_DIM) -> "EmbeddingBundle":
        tokens = obj.get("tokens") or []
        return cls(
            dense=np.asarray(obj["dense"], dtype=np.float64),
            sparse={int(k): float(v) for k, v in (obj.get("sparse") or {}).items()},
            tokens=np.asarray(tokens, dtype=np.float64).reshape(len(tokens), -1)
            if tokens
            else np.zeros((0, token_dim), dtype=np.float64),
        )


@dataclass
class HeadWeights:
    """Fusion weights for the dense/sparse/late heads. Default 0.4/0.2/0.4."""

    dense_w: float = 0.4
    sparse_w: float = 0.2
    late_w: float = 0.4

    def validate(self) -> None:
        if min(self.dense_w, self.sparse_w, self.late_w) < 0:
            raise ValueError("head weights must be non-negative")
        if abs(self.dense_w + self.sparse_w + self.late_w - 1.0) > 1e-9:
            raise ValueError("head weights must sum to 1")


DEFAULT_WEIGHTS = HeadWeights()


def _bucket(data: bytes, space: int, salt: bytes) -> int:
    digest = hashlib.blake2b(data, digest_size=8, person=salt).digest()
    return int.from_bytes(digest, "big") % space


def _splitmix64(state: int):
    mask = (1 << 64) - 1
    while True:
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        yield z ^ (z >> 31)


def _window_vector(window: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(
        hashlib.blake2b(window.encode("utf-8"), digest_size=8, person=b"tokvec\x00\x00").digest(),
        "big",
    )
    gen = _splitmix64(seed)
    vec = np.fromiter((next(gen) for _ in range(dim)), dtype=np.float64, count=dim)
    vec = vec / 2**63 - 1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


class HashEmbedder:
    """Deterministic embedder backed by hashing; no model weights involved."""

    def __init__(
        self,
        dense_dim: int = DENSE_DIM,
        token_dim: int = TOKEN_DIM,
        ngram: int = NGRAM,
        window: int = TOKEN_WINDOW,
    ):
        self.dense_dim = dense_dim
        self.token_dim = token_dim
        self.ngram = ngram
        self.window = window
        self._window_cache: dict[str, np.ndarray] = {}

    def embed(self, texts: list[str]) -> list[EmbeddingBundle]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> EmbeddingBundle:
        return EmbeddingBundle(
            dense=self._dense(text),
            sparse=self._sparse(text),
            tokens=self._tokens(text),
        )

    def _dense(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dense_dim, dtype=np.float64)
        if len(text) >= self.ngram:
            grams = (text[i : i + self.ngram] for i in range(len(text) - self.ngram + 1))
        elif text:
            grams = iter([text])
        else:
            # Empty text maps to a fixed basis vector so the head stays unit-norm.
            vec[0] = 1.0
            return vec
        for gram in grams:
            vec[_bucket(gram.encode("utf-8"), self.dense_dim, b"dense\x00\x00\x00")] += 1.0
        return vec / float(np.linalg.norm(vec))

    def _sparse(self, text: str) -> dict[int, float]:
        weights: dict[int, float] = {}
        for term in text.split():
            term_id = _bucket(term.encode("utf-8"), _SPARSE_SPACE, b"term\x00\x00\x00\x00")
            weights[term_id] = weights.get(term_id, 0.0) + 1.0
        return weights

    def _tokens(self, text: str) -> np.ndarray:
        windows = [text[i : i + self.window] for i in range(0, len(text), self.window)]
        if not windows:
            return np.zeros((0, self.token_dim), dtype=np.float64)
        rows = []
        for w in windows:
            cached = self._window_cache.get(w)
            if cached is None:
                cached = _window_vector(w, self.token_dim)
                self._window_cache[w] = cached
            rows.append(cached)
        return np.ascontiguousarray(np.stack(rows))
