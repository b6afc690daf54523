"""Hybrid retrieval: per-head scoring, fixed-weight fusion, ranked top-k.

Scoring is exhaustive (no ANN index) — corpora here are thousands of
sections and correctness beats speed. Ties in fused score break by
ascending law code so rankings are identical across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .embedding import EmbeddingBundle, HeadWeights
from .similarity import dense_score, fuse, late_score, sparse_score


@dataclass
class CorpusSection:
    code: int
    text: str
    embedding: EmbeddingBundle


@dataclass
class RetrievedSection:
    code: int
    dense_s: float
    sparse_s: float
    late_s: float
    fused: float
    rank: int = 0

    def to_json(self) -> dict:
        return {
            "code": self.code,
            "dense": self.dense_s,
            "sparse": self.sparse_s,
            "late": self.late_s,
            "fused": self.fused,
            "rank": self.rank,
        }


def score_section(
    query: EmbeddingBundle, section: CorpusSection, w: HeadWeights | None = None
) -> RetrievedSection:
    """Score one section against the query; rank is left unset (0)."""
    w = w or HeadWeights()
    d = dense_score(query, section.embedding)
    s = sparse_score(query, section.embedding)
    l = late_score(query, section.embedding)
    return RetrievedSection(
        code=section.code, dense_s=d, sparse_s=s, late_s=l, fused=fuse(d, s, l, w)
    )


def retrieve_topk(
    query: EmbeddingBundle,
    corpus: list[CorpusSection],
    k: int,
    w: HeadWeights | None = None,
) -> list[RetrievedSection]:
    """Top-k sections by fused score, deterministic tie-break on code."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [score_section(query, section, w) for section in corpus]
    scored.sort(key=lambda r: (-r.fused, r.code))
    top = scored[: min(k, len(scored))]
    for position, r in enumerate(top, start=1):
        r.rank = position
    return top


def section_to_json(section: CorpusSection) -> dict:
    obj = {"code": section.code, "text": section.text}
    obj.update(section.embedding.to_json())
    return obj


def section_from_json(obj: dict) -> CorpusSection:
    return CorpusSection(
        code=int(obj["code"]),
        text=obj["text"],
        embedding=EmbeddingBundle.from_json(obj),
    )


def load_corpus(path: str | Path) -> list[CorpusSection]:
    sections = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                sections.append(section_from_json(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad corpus row: {exc}") from exc
    codes = [s.code for s in sections]
    if len(set(codes)) != len(codes):
        raise ValueError(f"{path}: duplicate law codes in corpus")
    return sections


def save_corpus(sections: list[CorpusSection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for section in sections:
            fh.write(json.dumps(section_to_json(section)) + "\n")
