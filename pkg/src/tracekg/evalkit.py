"""Expert-evaluation analytics over 0-2 score matrices.

Ratings map onto an information-retrieval frame: 2 = true positive (fully
correct, traceable), 1 = false negative (correct but incomplete), 0 = false
positive (factual error). From those counts come precision, recall, and F1
per expert, pooled over all cells, and macro-averaged across experts (the
last two can differ; both are reported). The weighted mean summarizes the
score distribution and the pairwise Pearson matrix measures inter-rater
consistency. Pearson is undefined for constant vectors and is reported as
absent-with-reason rather than coerced to a number.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UndefinedMetricError, ValidationError

VALID_SCORES = (0, 1, 2)


@dataclass
class ScoreMatrix:
    question_ids: list[str]
    expert_ids: list[str]
    scores: list[list[int]]  # question-major grid

    def __post_init__(self) -> None:
        if len(self.scores) != len(self.question_ids):
            raise ValidationError("one score row required per question")
        for row in self.scores:
            if len(row) != len(self.expert_ids):
                raise ValidationError("score rows must be rectangular")
            for cell in row:
                if cell not in VALID_SCORES:
                    raise ValidationError(f"scores must be 0, 1 or 2; got {cell!r}")

    @property
    def n_ratings(self) -> int:
        return len(self.question_ids) * len(self.expert_ids)

    def column(self, expert_index: int) -> list[int]:
        return [row[expert_index] for row in self.scores]

    def cells(self) -> list[int]:
        return [cell for row in self.scores for cell in row]

    @classmethod
    def from_csv(cls, source: str | Path) -> "ScoreMatrix":
        """Parse `question_id,expert_A,...` CSV (text or file path)."""
        text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty score CSV") from None
        if len(header) < 2 or header[0] != "question_id":
            raise ValidationError("header must be question_id,<expert>,...")
        expert_ids = header[1:]
        question_ids: list[str] = []
        scores: list[list[int]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValidationError(f"line {line_no}: expected {len(header)} columns")
            question_ids.append(row[0])
            try:
                scores.append([int(cell) for cell in row[1:]])
            except ValueError:
                raise ValidationError(f"line {line_no}: scores must be integers") from None
        return cls(question_ids=question_ids, expert_ids=expert_ids, scores=scores)

    @classmethod
    def from_frequencies(
        cls, f2: int, f1: int, f0: int, n_experts: int = 4
    ) -> "ScoreMatrix":
        """Deterministic matrix with the given pooled score frequencies."""
        total = f2 + f1 + f0
        if total == 0 or total % n_experts:
            raise ValidationError("total ratings must be a positive multiple of n_experts")
        flat = [2] * f2 + [1] * f1 + [0] * f0
        n_questions = total // n_experts
        return cls(
            question_ids=[f"q{i + 1}" for i in range(n_questions)],
            expert_ids=[f"expert_{chr(ord('A') + j)}" for j in range(n_experts)],
            scores=[flat[i * n_experts : (i + 1) * n_experts] for i in range(n_questions)],
        )


def weighted_mean(matrix: ScoreMatrix) -> float:
    """Expected score of the discrete ratings: sum(k * f_k) / N."""
    if matrix.n_ratings == 0:
        raise UndefinedMetricError("weighted mean is undefined on an empty matrix")
    cells = matrix.cells()
    return math.fsum(cells) / len(cells)


def pearson(x: list[int] | list[float], y: list[int] | list[float]) -> float:
    """Sample Pearson correlation; undefined for constant vectors."""
    if len(x) != len(y):
        raise ValidationError("vectors must have equal length")
    if len(x) < 2:
        raise ValidationError("at least two samples required")
    mean_x = math.fsum(x) / len(x)
    mean_y = math.fsum(y) / len(y)
    sxy = math.fsum((a - mean_x) * (b - mean_y) for a, b in zip(x, y))
    sxx = math.fsum((a - mean_x) ** 2 for a in x)
    syy = math.fsum((b - mean_y) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetricError("correlation is undefined for a constant vector")
    return sxy / (math.sqrt(sxx) * math.sqrt(syy))


@dataclass
class PRF:
    tp: int
    fn: int
    fp: int
    precision: float | None
    recall: float | None
    f1: float | None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def fmt(value: float | None) -> dict:
            if value is None:
                return {"value": None}
            return {"value": round(value, 4), "percent": f"{value * 100:.2f}%"}

        out = {
            "tp": self.tp,
            "fn": self.fn,
            "fp": self.fp,
            "precision": fmt(self.precision),
            "recall": fmt(self.recall),
            "f1": fmt(self.f1),
        }
        if self.notes:
            out["notes"] = self.notes
        return out


def _prf_from_cells(cells: list[int]) -> PRF:
    tp = sum(1 for c in cells if c == 2)
    fn = sum(1 for c in cells if c == 1)
    fp = sum(1 for c in cells if c == 0)
    notes: list[str] = []
    precision = recall = f1 = None
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        notes.append("precision undefined: no ratings in {0, 2}")
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        notes.append("recall undefined: no ratings in {1, 2}")
    if precision is not None and recall is not None and (precision + recall) > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        notes.append("f1 undefined")
    return PRF(tp=tp, fn=fn, fp=fp, precision=precision, recall=recall, f1=f1, notes=notes)


@dataclass
class MetricsReport:
    per_expert: dict[str, PRF]
    pooled: PRF
    macro: dict[str, float | None]
    weighted_mean: float
    pearson_matrix: list[list[float | None]]
    expert_ids: list[str]

    def to_dict(self) -> dict:
        return {
            "per_expert": {eid: prf.to_dict() for eid, prf in self.per_expert.items()},
            "pooled": self.pooled.to_dict(),
            "macro": {
                key: (round(value, 4) if value is not None else None)
                for key, value in self.macro.items()
            },
            "weighted_mean": round(self.weighted_mean, 4),
            "weighted_mean_display": f"{self.weighted_mean:.2f}",
            "pearson": [
                [round(value, 4) if value is not None else None for value in row]
                for row in self.pearson_matrix
            ],
            "expert_ids": self.expert_ids,
        }


def map_and_score(matrix: ScoreMatrix) -> MetricsReport:
    """Full report: per-expert, pooled, and macro PRF plus consistency."""
    if matrix.n_ratings == 0:
        raise UndefinedMetricError("metrics are undefined on an empty matrix")
    per_expert = {
        expert_id: _prf_from_cells(matrix.column(i))
        for i, expert_id in enumerate(matrix.expert_ids)
    }
    pooled = _prf_from_cells(matrix.cells())

    macro: dict[str, float | None] = {}
    for key in ("precision", "recall", "f1"):
        values = [getattr(prf, key) for prf in per_expert.values()]
        defined = [v for v in values if v is not None]
        macro[key] = math.fsum(defined) / len(defined) if defined else None

    n_experts = len(matrix.expert_ids)
    grid: list[list[float | None]] = [[None] * n_experts for _ in range(n_experts)]
    for i in range(n_experts):
        grid[i][i] = 1.0
        for j in range(i + 1, n_experts):
            try:
                value = pearson(matrix.column(i), matrix.column(j))
            except UndefinedMetricError:
                value = None
            grid[i][j] = grid[j][i] = value

    return MetricsReport(
        per_expert=per_expert,
        pooled=pooled,
        macro=macro,
        weighted_mean=weighted_mean(matrix),
        pearson_matrix=grid,
        expert_ids=list(matrix.expert_ids),
    )
