"""Probability primitives shared by the forward and reverse processes.

Everything here is a pure function of its inputs and an RngStream, so replaying
a stream replays outputs bit-exactly. Integer-valued "Gaussian" draws use the
CDF-difference discretization: the mass of count v is the normal probability of
the unit cell [v-0.5, v+0.5], truncated to {0..M} and renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .codec import ConstraintError, CountVector


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Identical keys reproduce identical draw sequences across runs and
    platforms (PCG64 keyed through SeedSequence). Distinct logical tasks
    should use distinct stream_ids rather than sharing one stream.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((self.seed, self.stream_id)))
        )

    def child(self, k: int) -> "RngStream":
        """Derive an independent substream; children of distinct k never collide."""
        r = RngStream.__new__(RngStream)
        r.seed = self.seed
        r.stream_id = self.stream_id
        r.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((self.seed, self.stream_id, int(k))))
        )
        return r

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class GaussianParams:
    """Per-coordinate mean/scale pair of the element-wise discretized Gaussian."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=np.float64))
        if self.mu.shape != self.sigma.shape or self.mu.ndim != 1:
            raise ConstraintError(
                f"mu and sigma must be 1-d with equal length, got {self.mu.shape} and {self.sigma.shape}"
            )
        if np.any(self.sigma < 0):
            raise ConstraintError("sigma entries must be non-negative")

    @property
    def size(self) -> int:
        return self.mu.size


def _point_mass_index(mu: np.ndarray, support_max: int) -> np.ndarray:
    # Nearest integer, half up, clipped to valid counts.
    return np.clip(np.floor(mu + 0.5), 0, support_max).astype(np.int64)


def gaussian_pmf_table(mu: np.ndarray, sigma: np.ndarray, support_max: int) -> np.ndarray:
    """Per-coordinate pmf over counts {0..support_max}.

    mu, sigma may have any leading shape; the result appends an axis of length
    support_max + 1 holding the discretized, truncated, renormalized masses.
    Coordinates with sigma == 0 become point masses at round(mu).
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    v = np.arange(support_max + 1, dtype=np.float64)
    mu_e = mu[..., None]
    sig_e = np.where(sigma == 0.0, 1.0, sigma)[..., None]
    hi = ndtr((v + 0.5 - mu_e) / sig_e)
    lo = ndtr((v - 0.5 - mu_e) / sig_e)
    mass = hi - lo
    total = mass.sum(axis=-1, keepdims=True)
    # Point masses where sigma vanishes or where every cell underflowed.
    degenerate = (sigma == 0.0) | (total[..., 0] <= 0.0)
    if np.any(degenerate):
        idx = _point_mass_index(mu, support_max)
        onehot = (idx[..., None] == np.arange(support_max + 1)).astype(np.float64)
        mass = np.where(degenerate[..., None], onehot, mass)
        total = np.where(degenerate[..., None], 1.0, total)
    return mass / total


def discretized_gaussian_pmf(mu: float, sigma: float, v: int, support_max: int) -> float:
    """Mass of count v under the discretized truncated Gaussian on {0..support_max}."""
    if sigma < 0:
        raise ConstraintError(f"sigma must be non-negative, got {sigma}")
    if not 0 <= v <= support_max:
        raise ValueError(f"v={v} outside support {{0..{support_max}}}")
    table = gaussian_pmf_table(np.array([mu]), np.array([sigma]), support_max)
    return float(table[0, v])


def sample_pmf_rows(pmf: np.ndarray, rng: RngStream) -> np.ndarray:
    """Inverse-CDF draw from each row of a (..., K) pmf array; one uniform per row."""
    cdf = np.cumsum(pmf, axis=-1)
    u = rng.gen.random(size=pmf.shape[:-1])
    idx = (u[..., None] > cdf).sum(axis=-1)
    return np.minimum(idx, pmf.shape[-1] - 1).astype(np.int64)


def sample_discretized_gaussian(params: GaussianParams, support_max: int, rng: RngStream) -> np.ndarray:
    """Draw each coordinate independently from its discretized truncated pmf."""
    table = gaussian_pmf_table(params.mu, params.sigma, support_max)
    return sample_pmf_rows(table, rng)


def multinomial_noise_array(c: int, m: int, rng: RngStream, n: int | None = None) -> np.ndarray:
    """Uniform multinomial counts: m draws over c categories, tallied.

    Returns shape (c,) for n=None, else (n, c). Row sums equal m exactly.
    """
    if c < 1:
        raise ConstraintError(f"C must be >= 1, got {c}")
    if m < 0:
        raise ConstraintError(f"M must be >= 0, got {m}")
    pvals = np.full(c, 1.0 / c)
    size = None if n is None else int(n)
    return rng.gen.multinomial(m, pvals, size=size).astype(np.int64)


def sample_multinomial_noise(c: int, m: int, rng: RngStream) -> CountVector:
    """Draw one fixed-sum noise vector from the uniform multinomial prior."""
    return CountVector.from_array(multinomial_noise_array(c, m, rng), m)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def top_p_sample_rows(scores: np.ndarray, p: float, rng: RngStream) -> np.ndarray:
    """Nucleus sampling along the last axis of a (..., K) score array.

    Each row is softmaxed; the smallest prefix of descending-probability
    outcomes reaching cumulative mass >= p is kept (probability ties broken
    by lower index) and renormalized before one inverse-CDF draw per row.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"top-p must lie in (0, 1], got {p}")
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("top-p scores must be finite")
    probs = _softmax_rows(scores)
    order = np.argsort(-probs, axis=-1, kind="stable")
    sorted_p = np.take_along_axis(probs, order, axis=-1)
    csum = np.cumsum(sorted_p, axis=-1)
    keep = (csum - sorted_p) < p
    kept = np.where(keep, sorted_p, 0.0)
    kept /= kept.sum(axis=-1, keepdims=True)
    pos = sample_pmf_rows(kept, rng)
    return np.take_along_axis(order, pos[..., None], axis=-1)[..., 0]


def top_p_sample(scores: np.ndarray, p: float, rng: RngStream) -> int:
    """Nucleus-sample a single outcome index from one score vector."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError(f"expected a 1-d score vector, got shape {scores.shape}")
    return int(top_p_sample_rows(scores[None, :], p, rng)[0])
