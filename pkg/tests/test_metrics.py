"""Metric tests: exact hand values, closed-form enumeration counts, and
statistical sanity of the distance estimators."""

import math

import numpy as np
import pytest

from fsdd.codec import ConstraintError
from fsdd.metrics import (
    EvalReport,
    chi_square_stat,
    count_compositions,
    empirical_pmf,
    enumerate_count_vectors,
    evaluate_samples,
    sum_violation,
    tv_distance,
)


def test_tv_identical_and_disjoint():
    a = [(1, 2), (1, 2), (0, 3)]
    assert tv_distance(a, a) == 0.0
    b = [(3, 0), (2, 1)]
    assert tv_distance(a, b) == pytest.approx(1.0, abs=1e-12)


def test_tv_hand_value_against_exact_reference():
    samples = [(1, 0)] * 6 + [(0, 1)] * 4
    ref = {(1, 0): 0.5, (0, 1): 0.5}
    assert tv_distance(samples, ref) == pytest.approx(0.1)


def test_tv_sampling_noise_bound():
    # Ten-atom support, 1e5 exact draws: TV to the truth stays under 0.02.
    gen = np.random.default_rng(12)
    probs = gen.dirichlet(np.ones(10))
    atoms = [(i,) for i in range(10)]
    ref = {a: p for a, p in zip(atoms, probs)}
    draws = gen.choice(10, size=100_000, p=probs)
    samples = [(int(d),) for d in draws]
    assert tv_distance(samples, ref) < 0.02


def test_tv_symmetry_and_triangle_inequality():
    gen = np.random.default_rng(3)
    sets = [[(int(v),) for v in gen.integers(0, 5, size=200)] for _ in range(3)]
    a, b, c = sets
    assert tv_distance(a, b) == pytest.approx(tv_distance(b, a))
    assert tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12


def test_tv_rejects_empty():
    with pytest.raises(ValueError):
        tv_distance([], {(0,): 1.0})


def test_chi_square_exact_value():
    samples = [(0,)] * 60 + [(1,)] * 40
    ref = {(0,): 0.5, (1,): 0.5}
    # (60-50)^2/50 + (40-50)^2/50 = 4
    assert chi_square_stat(samples, ref) == pytest.approx(4.0)


def test_sum_violation_hand_case():
    rate, err = sum_violation([[2, 1], [3, 1]], 3)
    assert rate == 0.5
    assert err == 0.5


def test_sum_violation_all_valid():
    rate, err = sum_violation([[1, 2], [0, 3], [3, 0]], 3)
    assert rate == 0.0 and err == 0.0


def test_enumerate_tiny_hand_enumeration():
    assert enumerate_count_vectors(3, 2) == [
        (2, 0, 0),
        (1, 1, 0),
        (1, 0, 1),
        (0, 2, 0),
        (0, 1, 1),
        (0, 0, 2),
    ]
    assert enumerate_count_vectors(1, 9) == [(9,)]


def test_enumeration_matches_closed_form():
    for c in range(1, 7):
        for m in range(0, 7):
            atoms = enumerate_count_vectors(c, m)
            assert len(atoms) == count_compositions(c, m) == math.comb(m + c - 1, c - 1)
            assert len(set(atoms)) == len(atoms)
            assert all(sum(a) == m for a in atoms)


def test_enumeration_size_guard():
    with pytest.raises(ValueError):
        enumerate_count_vectors(30, 30)
    with pytest.raises(ConstraintError):
        enumerate_count_vectors(0, 3)


def test_empirical_pmf_normalizes():
    pmf = empirical_pmf([(0, 1), (0, 1), (1, 0), (0, 1)])
    assert pmf == {(0, 1): 0.75, (1, 0): 0.25}


def test_eval_report_validation_and_serialization():
    with pytest.raises(ConstraintError):
        EvalReport(tv_distance=1.5, chi_square_stat=0, sum_violation_rate=0, mean_abs_sum_error=0, n_samples=1)
    report = EvalReport(
        tv_distance=0.25, chi_square_stat=3.5, sum_violation_rate=0.1,
        mean_abs_sum_error=0.2, n_samples=100,
    )
    row = report.to_csv_row()
    assert row.startswith("100,0.25,3.5,0.1,")
    assert "tv distance" in report.to_text()


def test_evaluate_samples_with_class_breakdown():
    ref_all = {(2, 0): 0.5, (0, 2): 0.5}
    refs = {0: {(2, 0): 1.0}, 1: {(0, 2): 1.0}}
    samples = [(2, 0), (2, 0), (0, 2), (1, 1)]
    labels = [0, 0, 1, 1]
    report = evaluate_samples(samples, ref_all, 2, labels=labels, class_references=refs)
    assert report.n_samples == 4
    assert report.sum_violation_rate == 0.0
    assert report.per_class[0].tv_distance == 0.0
    assert report.per_class[1].tv_distance == pytest.approx(0.5)
