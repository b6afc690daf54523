"""End-to-end evaluation metrics and multi-run aggregation.

Per record: citation F1 against gold, coverage mapped from its judge label,
consistency = 1 - contradiction, and the joint score as the arithmetic mean
of the three. Dataset-level citation F1 is macro-averaged. Multi-run
aggregates report elementwise mean and population standard deviation;
reported numbers round half-up to four decimals (gains to two).

Judge labels are ingested from run files (offline judging); producing them
is not this module's job.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Collection, Iterable, Sequence

import numpy as np

from .answers import ContradictionLabel, CoverageLabel, consistency_reward, coverage_reward
from .citation import citation_f1
from .structured import BlockOrder, ParsedResponse, parse_response

DEFAULT_SEEDS = (69420, 69421, 69422)
METRIC_NAMES = ("citation_f1", "coverage", "consistency", "joint")


def round_half_up(value: float, places: int = 4) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass
class EvalRecord:
    record_id: str
    predicted: ParsedResponse | None
    gold_citations: set[int]
    coverage_label: CoverageLabel
    contradiction_label: ContradictionLabel


@dataclass
class EvalMetrics:
    citation_f1: float
    coverage: float
    consistency: float
    joint: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.citation_f1, self.coverage, self.consistency, self.joint)


def joint_score(citation: float, coverage: float, consistency: float) -> float:
    return (citation + coverage + consistency) / 3


def evaluate_record(r: EvalRecord) -> EvalMetrics:
    """Metrics for one record; a missing parse scores zero citation F1."""
    if r.predicted is None:
        f1 = 0.0
    else:
        f1 = citation_f1(set(r.predicted.citations), r.gold_citations).f1
    cov = coverage_reward(r.coverage_label)
    con = consistency_reward(r.contradiction_label)
    return EvalMetrics(f1, cov, con, joint_score(f1, cov, con))


def evaluate_run(records: Sequence[EvalRecord]) -> EvalMetrics:
    """Macro-average over a run's records."""
    if not records:
        raise ValueError("cannot evaluate an empty run")
    per_record = [evaluate_record(r) for r in records]
    f1 = float(np.mean([m.citation_f1 for m in per_record]))
    cov = float(np.mean([m.coverage for m in per_record]))
    con = float(np.mean([m.consistency for m in per_record]))
    return EvalMetrics(f1, cov, con, joint_score(f1, cov, con))


@dataclass
class RunAggregate:
    mean: EvalMetrics
    std: EvalMetrics
    run_count: int
    seeds: tuple[int, ...] = DEFAULT_SEEDS

    def to_json(self) -> dict:
        return {
            "run_count": self.run_count,
            "seeds": list(self.seeds[: self.run_count]),
            "mean": {n: round_half_up(v) for n, v in zip(METRIC_NAMES, self.mean.as_tuple())},
            "std": {n: round_half_up(v) for n, v in zip(METRIC_NAMES, self.std.as_tuple())},
        }


def _column_stats(column: np.ndarray) -> tuple[float, float]:
    # Sorting first makes the float result permutation-invariant, and the
    # all-equal short-circuit keeps the SD of identical runs exactly zero.
    if np.all(column == column[0]):
        return float(column[0]), 0.0
    ordered = np.sort(column)
    return float(ordered.mean()), float(ordered.std())


def aggregate_runs(
    runs: Sequence[EvalMetrics], seeds: Sequence[int] | None = None
) -> RunAggregate:
    """Elementwise mean and population SD across per-run mean metrics."""
    if not runs:
        raise ValueError("need at least one run")
    table = np.asarray([m.as_tuple() for m in runs], dtype=np.float64)
    stats = [_column_stats(table[:, i]) for i in range(table.shape[1])]
    used = tuple(seeds) if seeds is not None else DEFAULT_SEEDS
    return RunAggregate(
        mean=EvalMetrics(*(s[0] for s in stats)),
        std=EvalMetrics(*(s[1] for s in stats)),
        run_count=len(runs),
        seeds=used,
    )


def gains_pct(base: float, new: float) -> float:
    """Relative gain over a baseline, in percent, two decimals."""
    if base <= 0:
        raise ValueError("baseline must be positive")
    return round_half_up(100.0 * (new - base) / base, places=2)


def retriever_ceiling(
    retrieved: Sequence[Collection[int]], gold: Sequence[Collection[int]]
) -> float:
    """Macro-averaged F1 of retrieved sets against gold — the upper bound on
    downstream citation F1, since models cannot cite what was not provided."""
    if len(retrieved) != len(gold):
        raise ValueError("retrieved and gold lists must have equal length")
    if not retrieved:
        raise ValueError("need at least one record")
    scores = [citation_f1(set(r), set(g)).f1 for r, g in zip(retrieved, gold)]
    return float(np.mean(scores))


def corpus_stats(records: Iterable[tuple[str, Collection[int]]]) -> tuple[float, float]:
    """(mean reference-answer length in chars, mean gold sections per record)."""
    answers: list[int] = []
    sections: list[int] = []
    for answer, gold_set in records:
        answers.append(len(answer))
        sections.append(len(gold_set))
    if not answers:
        raise ValueError("need at least one record")
    return float(np.mean(answers)), float(np.mean(sections))


# ---------------------------------------------------------------------------
# Run-file ingestion and report formatting
# ---------------------------------------------------------------------------


def parse_run_file(
    path: str, order: BlockOrder = BlockOrder.REASONING_ANSWER_CITATION
) -> list[EvalRecord]:
    """Read a JSONL run file of raw completions plus offline judge labels."""
    records: list[EvalRecord] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                parsed, _ = parse_response(row["raw_completion"], order)
                records.append(
                    EvalRecord(
                        record_id=str(row["record_id"]),
                        predicted=parsed,
                        gold_citations={int(c) for c in row["gold_citations"]},
                        coverage_label=CoverageLabel.parse(row["coverage_label"]),
                        contradiction_label=ContradictionLabel.parse(
                            row["contradiction_label"]
                        ),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad run row: {exc}") from exc
    return records


def format_aggregate_table(agg: RunAggregate) -> str:
    """Aligned-column text table of an aggregate report."""
    header = f"{'metric':<12} {'mean':>8} {'sd':>8}"
    lines = [header, "-" * len(header)]
    for name, mean, std in zip(METRIC_NAMES, agg.mean.as_tuple(), agg.std.as_tuple()):
        lines.append(f"{name:<12} {round_half_up(mean):>8.4f} {round_half_up(std):>8.4f}")
    lines.append(f"{'runs':<12} {agg.run_count:>8}")
    return "\n".join(lines)
