"""Constrained reverse process: iterative denoising that never leaves sum = M.

Each step predicts per-position count distributions, nucleus-samples a clean
candidate and repairs its sum, then draws the next state from the discretized
truncated Gaussian posterior and repairs that sum too. The noise draw x1 is
kept for the whole trajectory because the posterior scale reads |x1 - x0|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import ConstraintError, CountVector
from .forward import greedy_adjust_table
from .kernels import (
    GaussianParams,
    RngStream,
    gaussian_pmf_table,
    multinomial_noise_array,
    sample_pmf_rows,
    top_p_sample_rows,
)
from .net import DenoiserLogits, ParameterStore, forward_batch

STREAM_SAMPLE = 4 << 40

SCHEDULES = {
    "linear": lambda t: t,
    "constant": lambda t: 1.0,
    "none": lambda t: 0.0,
}


@dataclass(frozen=True)
class SampleConfig:
    num_steps: int = 25
    top_p: float = 0.95
    guidance_scale: float = 0.0
    schedule_f: str = "linear"
    seed: int = 0
    class_label: int | None = None

    def __post_init__(self) -> None:
        if self.num_steps < 1:
            raise ConstraintError(f"num_steps must be >= 1, got {self.num_steps}")
        if not 0.0 < self.top_p <= 1.0:
            raise ConstraintError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.guidance_scale < 0:
            raise ConstraintError(f"guidance_scale must be >= 0, got {self.guidance_scale}")
        if self.schedule_f not in SCHEDULES:
            raise ConstraintError(
                f"schedule_f must be one of {sorted(SCHEDULES)}, got {self.schedule_f!r}"
            )


def guided_logits(cond: DenoiserLogits, uncond: DenoiserLogits, w: float) -> DenoiserLogits:
    """Classifier-free combination (1 + w) * cond - w * uncond."""
    if cond.grid.shape != uncond.grid.shape:
        raise ConstraintError("conditional and unconditional logit shapes differ")
    return DenoiserLogits((1.0 + w) * cond.grid - w * uncond.grid)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _denoiser_logits(
    params: ParameterStore,
    x: np.ndarray,
    t: float,
    config: SampleConfig,
) -> np.ndarray:
    """(n, C, M+1) logits, with classifier-free guidance when it is active."""
    n = x.shape[0]
    ts = np.full(n, t)
    use_cfg = (
        config.guidance_scale > 0
        and config.class_label is not None
        and params.config.num_classes > 0
    )
    if not use_cfg:
        labels = None
        if config.class_label is not None and params.config.num_classes > 0:
            labels = np.full(n, config.class_label, dtype=np.int64)
        return forward_batch(params, x, ts, labels)
    stacked = np.concatenate([x, x], axis=0)
    labels = np.concatenate(
        [np.full(n, config.class_label, dtype=np.int64), np.full(n, -1, dtype=np.int64)]
    )
    both = forward_batch(params, stacked, np.concatenate([ts, ts]), labels)
    w = config.guidance_scale
    return (1.0 + w) * both[:n] - w * both[n:]


def _reverse_step_arrays(
    params: ParameterStore,
    x: np.ndarray,
    x1: np.ndarray,
    t: float,
    delta_t: float,
    config: SampleConfig,
    streams: list[RngStream],
    adjust: bool = True,
) -> np.ndarray:
    m = params.config.num_tokens
    schedule = SCHEDULES[config.schedule_f]
    logits = _denoiser_logits(params, x, t, config)
    probs = _softmax_rows(logits)
    n, c = x.shape
    x0 = np.empty_like(x)
    for i in range(n):
        cand = top_p_sample_rows(logits[i], config.top_p, streams[i])
        x0[i] = greedy_adjust_table(cand, probs[i], m) if adjust else cand
    ratio = delta_t / t
    mu = (1.0 - ratio) * x + ratio * x0
    sigma = (np.abs(x1 - x0) / 4.0) * float(schedule(t - delta_t))
    tables = gaussian_pmf_table(mu, sigma, m)
    out = np.empty_like(x)
    for i in range(n):
        raw = sample_pmf_rows(tables[i], streams[i])
        out[i] = greedy_adjust_table(raw, tables[i], m) if adjust else raw
    return out


def reverse_step(
    params: ParameterStore,
    x_t: CountVector,
    x1: CountVector,
    t: float,
    delta_t: float,
    config: SampleConfig,
    rng: RngStream,
) -> CountVector:
    """One denoising transition from time t to t - delta_t."""
    m = params.config.num_tokens
    if x_t.target_sum != m or sum(x_t.counts) != m:
        raise ConstraintError("reverse_step input does not satisfy the fixed-sum contract")
    if not 0.0 < delta_t <= t:
        raise ConstraintError(f"need 0 < delta_t <= t, got delta_t={delta_t}, t={t}")
    out = _reverse_step_arrays(
        params, x_t.to_array()[None, :], x1.to_array()[None, :], t, delta_t, config, [rng]
    )[0]
    return CountVector.from_array(out, m)


def time_grid(num_steps: int) -> list[float]:
    """The visited times 1, 1 - 1/n, ..., 1/n (each step then moves down by 1/n)."""
    return [1.0 - k / num_steps for k in range(num_steps)]


def generate_batch(
    params: ParameterStore,
    config: SampleConfig,
    n: int,
    adjust: bool = True,
    trajectory_hook=None,
) -> np.ndarray:
    """Draw n samples; returns an (n, C) integer array.

    Sample i consumes only the stream (seed, STREAM_SAMPLE + i), so batching
    does not change which random numbers a given sample sees. The optional
    trajectory_hook(t_next, states) observes every intermediate state.
    """
    if config.class_label is not None and not (
        0 <= config.class_label < params.config.num_classes
    ):
        raise ConstraintError(
            f"class_label {config.class_label} incompatible with "
            f"num_classes={params.config.num_classes}"
        )
    dcfg = params.config
    streams = [RngStream(config.seed, STREAM_SAMPLE + i) for i in range(n)]
    x1 = np.stack(
        [multinomial_noise_array(dcfg.codebook_size, dcfg.num_tokens, s) for s in streams]
    )
    x = x1.copy()
    dt = 1.0 / config.num_steps
    for t in time_grid(config.num_steps):
        x = _reverse_step_arrays(params, x, x1, t, dt, config, streams, adjust=adjust)
        if trajectory_hook is not None:
            trajectory_hook(t - dt, x.copy())
    return x


def generate(params: ParameterStore, config: SampleConfig) -> CountVector:
    """Draw one sample from multinomial noise through the constrained reverse chain."""
    out = generate_batch(params, config, 1)[0]
    return CountVector.from_array(out, params.config.num_tokens)


def sample_metadata(config: SampleConfig, index: int) -> dict:
    """Per-sample sidecar record for the JSON-lines metadata file."""
    return {
        "seed": config.seed,
        "sample_index": index,
        "class": config.class_label,
        "steps": config.num_steps,
        "w": config.guidance_scale,
        "p": config.top_p,
        "schedule_f": config.schedule_f,
    }


def posterior_params(
    x_t: np.ndarray, x0: np.ndarray, x1: np.ndarray, t: float, delta_t: float, schedule_f: str
) -> GaussianParams:
    """Posterior mean/scale for one transition; exposed for tests and tooling."""
    ratio = delta_t / t
    mu = (1.0 - ratio) * np.asarray(x_t, dtype=np.float64) + ratio * np.asarray(x0, dtype=np.float64)
    sigma = (np.abs(np.asarray(x1) - np.asarray(x0)) / 4.0) * float(
        SCHEDULES[schedule_f](t - delta_t)
    )
    return GaussianParams(mu, sigma)
