from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracekg.errors import UndefinedMetricError, ValidationError
from tracekg.evalkit import MetricsReport, ScoreMatrix, map_and_score, pearson, weighted_mean


def matrix_from_columns(columns: dict[str, list[int]]) -> ScoreMatrix:
    expert_ids = list(columns)
    n = len(next(iter(columns.values())))
    return ScoreMatrix(
        question_ids=[f"q{i}" for i in range(n)],
        expert_ids=expert_ids,
        scores=[[columns[e][i] for e in expert_ids] for i in range(n)],
    )


# ----------------------------------------------------------------------
# weighted mean
# ----------------------------------------------------------------------


def test_weighted_mean_published_distribution():
    matrix = ScoreMatrix.from_frequencies(f2=284, f1=107, f0=9, n_experts=4)
    assert matrix.n_ratings == 400
    mean = weighted_mean(matrix)
    assert mean == pytest.approx(1.6875)
    assert f"{mean:.2f}" == "1.69"


def test_weighted_mean_extremes():
    all_twos = matrix_from_columns({"A": [2, 2], "B": [2, 2]})
    assert weighted_mean(all_twos) == 2.0
    balanced = matrix_from_columns({"A": [0, 1, 2]})
    assert weighted_mean(balanced) == pytest.approx(1.0)


def test_weighted_mean_empty_matrix_errors():
    empty = ScoreMatrix(question_ids=[], expert_ids=["A"], scores=[])
    with pytest.raises(UndefinedMetricError):
        weighted_mean(empty)


# ----------------------------------------------------------------------
# pearson
# ----------------------------------------------------------------------


def test_pearson_self_correlation():
    assert pearson([0, 1, 2, 1], [0, 1, 2, 1]) == pytest.approx(1.0)


def test_pearson_perfect_anticorrelation():
    assert pearson([0, 1, 2], [2, 1, 0]) == pytest.approx(-1.0)


def test_pearson_hand_computed_value():
    # means 1.25/1.25, covariance sum 1.75, variance sums 2.75 each -> 7/11
    value = pearson([2, 1, 2, 0], [2, 2, 1, 0])
    assert value == pytest.approx(7 / 11)
    assert value == pytest.approx(float(np.corrcoef([2, 1, 2, 0], [2, 2, 1, 0])[0, 1]))


def test_pearson_constant_vector_is_undefined():
    with pytest.raises(UndefinedMetricError):
        pearson([1, 1, 1], [0, 1, 2])
    with pytest.raises(UndefinedMetricError):
        pearson([0, 1, 2], [2, 2, 2])


def test_pearson_length_checks():
    with pytest.raises(ValidationError):
        pearson([1, 2], [1, 2, 0])
    with pytest.raises(ValidationError):
        pearson([1], [2])


@settings(max_examples=100, deadline=None)
@given(
    data=st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=3, max_size=50),
    scale=st.floats(min_value=0.1, max_value=50),
    shift=st.floats(min_value=-50, max_value=50),
)
def test_pearson_symmetry_and_affine_invariance(data, scale, shift):
    x = [a for a, _ in data]
    y = [b for _, b in data]
    try:
        base = pearson(x, y)
    except UndefinedMetricError:
        return
    assert pearson(y, x) == pytest.approx(base, abs=1e-12)
    transformed = [scale * a + shift for a in x]
    assert pearson(transformed, y) == pytest.approx(base, abs=1e-12)


# ----------------------------------------------------------------------
# TP/FN/FP mapping
# ----------------------------------------------------------------------


def test_pooled_published_benchmark_values():
    matrix = ScoreMatrix.from_frequencies(f2=284, f1=107, f0=9, n_experts=4)
    report = map_and_score(matrix)
    assert report.pooled.tp == 284
    assert report.pooled.fn == 107
    assert report.pooled.fp == 9
    assert report.pooled.precision == pytest.approx(0.9693, abs=1e-4)
    assert report.pooled.recall == pytest.approx(0.7263, abs=1e-4)
    assert report.pooled.f1 == pytest.approx(0.830, abs=1e-3)


def test_pooled_generalization_corpus_values():
    # pooled counts give 91.63 / 63.76 / 75.19 percent (macro averaging is
    # what could produce other figures; both are reported)
    matrix = ScoreMatrix.from_frequencies(f2=241, f1=137, f0=22, n_experts=4)
    report = map_and_score(matrix)
    assert report.pooled.precision == pytest.approx(241 / 263, abs=1e-9)
    assert report.pooled.recall == pytest.approx(241 / 378, abs=1e-9)
    assert report.pooled.f1 == pytest.approx(0.7519, abs=1e-4)
    assert set(report.macro) == {"precision", "recall", "f1"}


def test_all_twos_column_is_perfect():
    report = map_and_score(matrix_from_columns({"A": [2, 2, 2]}))
    prf = report.per_expert["A"]
    assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)


def test_balanced_column_formula():
    report = map_and_score(matrix_from_columns({"A": [2, 1, 0]}))
    prf = report.per_expert["A"]
    assert (prf.tp, prf.fn, prf.fp) == (1, 1, 1)
    assert (prf.precision, prf.recall, prf.f1) == (0.5, 0.5, 0.5)


def test_undefined_precision_reported_as_absent():
    report = map_and_score(matrix_from_columns({"A": [1, 1, 1]}))
    prf = report.per_expert["A"]
    assert prf.precision is None
    assert prf.recall == 0.0
    assert prf.f1 is None
    assert any("precision undefined" in note for note in prf.notes)


def test_pooled_counts_equal_sum_of_expert_counts():
    rng = random.Random(3)
    columns = {e: [rng.randint(0, 2) for _ in range(40)] for e in ("A", "B", "C", "D")}
    report = map_and_score(matrix_from_columns(columns))
    assert report.pooled.tp == sum(p.tp for p in report.per_expert.values())
    assert report.pooled.fn == sum(p.fn for p in report.per_expert.values())
    assert report.pooled.fp == sum(p.fp for p in report.per_expert.values())


def test_f1_between_precision_and_recall():
    rng = random.Random(9)
    for _ in range(30):
        cells = [rng.randint(0, 2) for _ in range(30)]
        report = map_and_score(matrix_from_columns({"A": cells}))
        prf = report.per_expert["A"]
        if prf.f1 is None:
            continue
        low, high = sorted((prf.precision, prf.recall))
        assert low - 1e-12 <= prf.f1 <= high + 1e-12


def test_row_permutation_leaves_metrics_unchanged():
    rng = random.Random(11)
    columns = {e: [rng.randint(0, 2) for _ in range(25)] for e in ("A", "B", "C")}
    matrix = matrix_from_columns(columns)
    base = map_and_score(matrix).to_dict()
    order = list(range(25))
    rng.shuffle(order)
    shuffled = ScoreMatrix(
        question_ids=[matrix.question_ids[i] for i in order],
        expert_ids=matrix.expert_ids,
        scores=[matrix.scores[i] for i in order],
    )
    shuffled_report = map_and_score(shuffled).to_dict()
    base.pop("expert_ids")
    shuffled_report.pop("expert_ids")
    assert shuffled_report == base


def test_pearson_matrix_symmetric_unit_diagonal():
    rng = random.Random(13)
    columns = {e: [rng.randint(0, 2) for _ in range(30)] for e in ("A", "B", "C", "D")}
    report = map_and_score(matrix_from_columns(columns))
    grid = report.pearson_matrix
    for i in range(4):
        assert grid[i][i] == 1.0
        for j in range(4):
            assert grid[i][j] == grid[j][i]


def test_pearson_matrix_handles_constant_column():
    report = map_and_score(matrix_from_columns({"A": [2, 2, 2], "B": [0, 1, 2]}))
    assert report.pearson_matrix[0][1] is None
    assert report.pearson_matrix[0][0] == 1.0


# ----------------------------------------------------------------------
# CSV ingestion
# ----------------------------------------------------------------------


def test_from_csv_roundtrip():
    text = "question_id,expert_A,expert_B\nq1,2,1\nq2,0,2\n"
    matrix = ScoreMatrix.from_csv(text)
    assert matrix.expert_ids == ["expert_A", "expert_B"]
    assert matrix.scores == [[2, 1], [0, 2]]


def test_from_csv_rejects_bad_cells():
    with pytest.raises(ValidationError):
        ScoreMatrix.from_csv("question_id,expert_A\nq1,3\n")
    with pytest.raises(ValidationError):
        ScoreMatrix.from_csv("question_id,expert_A\nq1,two\n")
    with pytest.raises(ValidationError):
        ScoreMatrix.from_csv("id,expert_A\nq1,1\n")


def test_report_serialization_rounding():
    matrix = ScoreMatrix.from_frequencies(f2=284, f1=107, f0=9, n_experts=4)
    payload = map_and_score(matrix).to_dict()
    assert payload["pooled"]["precision"]["value"] == 0.9693
    assert payload["pooled"]["precision"]["percent"] == "96.93%"
    assert payload["pooled"]["recall"]["percent"] == "72.63%"
    assert payload["weighted_mean"] == 1.6875
    assert payload["weighted_mean_display"] == "1.69"
