"""Constrained forward corruption and the greedy sum-repair step.

The forward path interpolates per-coordinate means between a data vector and a
noise vector, draws integer counts from the discretized Gaussian, and then
repairs the total back to M by unit increments or decrements chosen greedily
to preserve the sample's product likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import ConstraintError, CountVector
from .kernels import GaussianParams, RngStream, gaussian_pmf_table, sample_pmf_rows


@dataclass(frozen=True)
class NoisySample:
    """A sum-M corrupted vector at time t plus the parameters that produced it."""

    x_t: CountVector
    t: float
    params: GaussianParams

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise ConstraintError(f"t={self.t} outside [0, 1]")


def forward_params(x0: CountVector, x1: CountVector, t: float) -> GaussianParams:
    """Interpolation parameters: mu = t*x1 + (1-t)*x0, sigma = |x1 - x0| / 4."""
    if x0.size != x1.size or x0.target_sum != x1.target_sum:
        raise ConstraintError(
            f"x0 (C={x0.size}, M={x0.target_sum}) and x1 (C={x1.size}, M={x1.target_sum}) must match"
        )
    if not 0.0 <= t <= 1.0:
        raise ConstraintError(f"t={t} outside [0, 1]")
    a0 = x0.to_array().astype(np.float64)
    a1 = x1.to_array().astype(np.float64)
    return GaussianParams(mu=t * a1 + (1.0 - t) * a0, sigma=np.abs(a1 - a0) / 4.0)


def greedy_adjust_table(x_tilde: np.ndarray, pmf: np.ndarray, target_sum: int) -> np.ndarray:
    """Repair the total of x_tilde to target_sum with likelihood-greedy unit moves.

    pmf is a (C, K) table whose row j gives the probability of each count value
    at coordinate j; K-1 is the largest admissible count. Rounds follow the
    adjusting-sampling scheme: while the surplus delta is nonzero, move the
    min(|delta|, #feasible) distinct coordinates with the largest per-unit
    log-likelihood gain one step toward the target, excluding coordinates that
    would leave [0, K-1]. Gain ties break toward the lower index.
    """
    x = np.array(x_tilde, dtype=np.int64, copy=True)
    pmf = np.asarray(pmf, dtype=np.float64)
    if x.ndim != 1 or pmf.shape != (x.size, pmf.shape[1]):
        raise ConstraintError(f"shape mismatch: x {x.shape}, pmf {pmf.shape}")
    support_max = pmf.shape[1] - 1
    if np.any(x < 0) or np.any(x > support_max):
        raise ConstraintError("x_tilde entries outside pmf support")
    rows = np.arange(x.size)
    delta = int(x.sum()) - int(target_sum)
    while delta != 0:
        sgn = 1 if delta > 0 else -1
        cand = x - sgn
        feasible = (cand >= 0) & (cand <= support_max)
        assert feasible.any(), "no adjustable coordinate left; inputs were invalid"
        cand_c = np.clip(cand, 0, support_max)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.log(pmf[rows, cand_c]) - np.log(pmf[rows, x])
        gain = np.where(np.isnan(gain), -np.inf, gain)
        feas_idx = np.flatnonzero(feasible)
        k = min(abs(delta), feas_idx.size)
        pick = feas_idx[np.argsort(-gain[feas_idx], kind="stable")[:k]]
        x[pick] -= sgn
        delta -= sgn * k
    return x


def greedy_adjust(x_tilde: np.ndarray, params: GaussianParams, target_sum: int) -> CountVector:
    """Greedy sum repair against a discretized-Gaussian likelihood."""
    table = gaussian_pmf_table(params.mu, params.sigma, int(target_sum))
    fixed = greedy_adjust_table(np.asarray(x_tilde, dtype=np.int64), table, int(target_sum))
    return CountVector.from_array(fixed, int(target_sum))


def sample_forward(x0: CountVector, x1: CountVector, t: float, rng: RngStream) -> NoisySample:
    """Draw a corrupted vector at time t and repair its sum to M exactly."""
    params = forward_params(x0, x1, t)
    m = x0.target_sum
    table = gaussian_pmf_table(params.mu, params.sigma, m)
    raw = sample_pmf_rows(table, rng)
    fixed = greedy_adjust_table(raw, table, m)
    return NoisySample(CountVector.from_array(fixed, m), float(t), params)


def sample_forward_batch(
    x0: np.ndarray,
    x1: np.ndarray,
    t: np.ndarray,
    m: int,
    rng: RngStream,
    adjust: bool = True,
) -> np.ndarray:
    """Vectorized forward corruption for a (B, C) batch with per-row times.

    With adjust=False the raw discretized draws are returned (row sums may
    differ from m); this arm exists for the unconstrained baseline.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)[:, None]
    mu = t * x1 + (1.0 - t) * x0
    sigma = np.abs(x1 - x0) / 4.0
    table = gaussian_pmf_table(mu, sigma, m)
    raw = sample_pmf_rows(table, rng)
    if not adjust:
        return raw
    out = np.empty_like(raw)
    for i in range(raw.shape[0]):
        out[i] = greedy_adjust_table(raw[i], table[i], m)
    return out
