"""Distribution distances, constraint-violation accounting, and small-instance
enumeration used as ground truth throughout the test and evaluation paths."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .codec import ConstraintError, CountVector

ENUMERATION_LIMIT = 10**6


def _as_tuple(x) -> tuple[int, ...]:
    if isinstance(x, CountVector):
        return x.counts
    return tuple(int(v) for v in np.asarray(x).reshape(-1))


def empirical_pmf(samples: Sequence) -> dict[tuple[int, ...], float]:
    if len(samples) == 0:
        raise ValueError("cannot build an empirical distribution from zero samples")
    counts = Counter(_as_tuple(s) for s in samples)
    n = len(samples)
    return {k: v / n for k, v in counts.items()}


def tv_distance(samples: Sequence, reference) -> float:
    """Half the L1 distance between the empirical law of samples and reference.

    reference may be an exact pmf mapping count-tuples to probabilities, or a
    second sample set (compared empirically).
    """
    p_hat = empirical_pmf(samples)
    if isinstance(reference, Mapping):
        p_ref = dict(reference)
    else:
        p_ref = empirical_pmf(reference)
    support = set(p_hat) | set(p_ref)
    return 0.5 * sum(abs(p_hat.get(k, 0.0) - p_ref.get(k, 0.0)) for k in support)


def chi_square_stat(samples: Sequence, reference: Mapping) -> float:
    """Pearson statistic of the sample tallies against an exact reference pmf."""
    p_hat = empirical_pmf(samples)
    n = len(samples)
    stat = 0.0
    for atom, p in reference.items():
        if p <= 0:
            continue
        expected = n * p
        observed = n * p_hat.get(tuple(atom), 0.0)
        stat += (observed - expected) ** 2 / expected
    return stat


def sum_violation(samples, target_sum: int) -> tuple[float, float]:
    """Fraction of rows whose total differs from target_sum, and mean |total - target|."""
    rows = [np.asarray(_as_tuple(s), dtype=np.int64) for s in samples]
    if not rows:
        raise ValueError("cannot score zero samples")
    sums = np.array([r.sum() for r in rows])
    err = np.abs(sums - target_sum)
    return float((err > 0).mean()), float(err.mean())


def count_compositions(c: int, m: int) -> int:
    """Number of length-c non-negative integer vectors summing to m."""
    return math.comb(m + c - 1, c - 1)


def enumerate_count_vectors(c: int, m: int) -> list[tuple[int, ...]]:
    """All valid count vectors, duplicate-free, in descending lexicographic order."""
    if c < 1 or m < 0:
        raise ConstraintError(f"need C >= 1 and M >= 0, got C={c}, M={m}")
    total = count_compositions(c, m)
    if total > ENUMERATION_LIMIT:
        raise ValueError(
            f"support size {total} exceeds the enumeration limit {ENUMERATION_LIMIT}"
        )
    out: list[tuple[int, ...]] = []
    prefix = [0] * c

    def rec(pos: int, remaining: int) -> None:
        if pos == c - 1:
            prefix[pos] = remaining
            out.append(tuple(prefix))
            return
        for v in range(remaining, -1, -1):
            prefix[pos] = v
            rec(pos + 1, remaining - v)

    rec(0, m)
    return out


@dataclass(frozen=True)
class EvalReport:
    """Distribution-quality summary for one evaluated sample set."""

    tv_distance: float
    chi_square_stat: float
    sum_violation_rate: float
    mean_abs_sum_error: float
    n_samples: int
    per_class: dict[int, "EvalReport"] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.tv_distance <= 1.0 + 1e-12:
            raise ConstraintError(f"tv_distance {self.tv_distance} outside [0, 1]")
        if not 0.0 <= self.sum_violation_rate <= 1.0:
            raise ConstraintError(f"sum_violation_rate {self.sum_violation_rate} outside [0, 1]")

    CSV_HEADER = "n_samples,tv_distance,chi_square_stat,sum_violation_rate,mean_abs_sum_error"

    def to_csv_row(self) -> str:
        return (
            f"{self.n_samples},{self.tv_distance!r},{self.chi_square_stat!r},"
            f"{self.sum_violation_rate!r},{self.mean_abs_sum_error!r}"
        )

    def to_text(self) -> str:
        lines = [
            f"samples            : {self.n_samples}",
            f"tv distance        : {self.tv_distance:.6f}",
            f"chi-square stat    : {self.chi_square_stat:.6f}",
            f"sum violation rate : {self.sum_violation_rate:.6f}",
            f"mean |sum - M|     : {self.mean_abs_sum_error:.6f}",
        ]
        if self.per_class:
            for label in sorted(self.per_class):
                sub = self.per_class[label]
                lines.append(
                    f"class {label}: tv={sub.tv_distance:.6f} "
                    f"chi2={sub.chi_square_stat:.6f} n={sub.n_samples}"
                )
        return "\n".join(lines)


def evaluate_samples(
    samples: Sequence,
    reference,
    target_sum: int,
    labels: Iterable[int] | None = None,
    class_references: Mapping[int, Mapping] | None = None,
) -> EvalReport:
    """Build the full report; per-class breakdown requires labels and per-class pmfs."""
    tv = tv_distance(samples, reference)
    chi2 = chi_square_stat(samples, reference) if isinstance(reference, Mapping) else float("nan")
    rate, mean_err = sum_violation(samples, target_sum)
    per_class = None
    if labels is not None and class_references is not None:
        labels = list(labels)
        per_class = {}
        for label, ref in class_references.items():
            sub = [s for s, l in zip(samples, labels) if l == label]
            if not sub:
                continue
            sub_rate, sub_err = sum_violation(sub, target_sum)
            per_class[int(label)] = EvalReport(
                tv_distance=tv_distance(sub, ref),
                chi_square_stat=chi_square_stat(sub, ref),
                sum_violation_rate=sub_rate,
                mean_abs_sum_error=sub_err,
                n_samples=len(sub),
            )
    return EvalReport(
        tv_distance=tv,
        chi_square_stat=chi2,
        sum_violation_rate=rate,
        mean_abs_sum_error=mean_err,
        n_samples=len(samples),
        per_class=per_class,
    )
