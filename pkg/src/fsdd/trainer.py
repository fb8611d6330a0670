"""Training loop: time sampling, constrained corruption, AdamW, EMA, checkpoints.

All randomness is drawn from streams keyed by (seed, purpose + index), so a
run is a pure function of (dataset, configs) and an interrupted run resumed
from its checkpoint continues bit-identically.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import CheckpointBundle, load_checkpoint, save_checkpoint
from .codec import ConstraintError
from .forward import sample_forward_batch
from .kernels import RngStream, multinomial_noise_array
from .net import DenoiserConfig, ParameterStore, init_params, loss_and_grads

STREAM_INIT = 1 << 40
STREAM_SHUFFLE = 2 << 40
STREAM_STEP = 3 << 40

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

LOG_HEADER = "step,loss,ema_loss,wall_ms"
_LOSS_SMOOTH = 0.9


@dataclass
class TrainConfig:
    steps: int
    batch_size: int = 64
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    ema_decay: float = 0.999
    seed: int = 0
    eval_every: int = 1
    checkpoint_path: str = "model.ckpt"
    checkpoint_every: int = 0
    log_path: str | None = None
    fixed_sum: bool = True

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ConstraintError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise ConstraintError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConstraintError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConstraintError(f"ema_decay must lie in [0, 1), got {self.ema_decay}")
        if self.eval_every < 1:
            raise ConstraintError(f"eval_every must be >= 1, got {self.eval_every}")


@dataclass
class EmaState:
    """Exponentially averaged shadow of the live parameters."""

    shadow: dict[str, np.ndarray]
    decay: float

    @classmethod
    def from_params(cls, params: ParameterStore, decay: float) -> "EmaState":
        return cls({k: v.copy() for k, v in params.as_arrays().items()}, decay)

    def update(self, params: ParameterStore) -> None:
        d = self.decay
        for name, tensor in params.tensors.items():
            s = self.shadow[name]
            s *= d
            s += (1.0 - d) * tensor.data


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    count: int = 0

    @classmethod
    def from_params(cls, params: ParameterStore) -> "AdamState":
        zeros = {k: np.zeros_like(v) for k, v in params.as_arrays().items()}
        return cls({k: v.copy() for k, v in zeros.items()}, zeros, 0)


def _adamw_update(params: ParameterStore, grads: dict[str, np.ndarray], opt: AdamState, config: TrainConfig) -> None:
    opt.count += 1
    bc1 = 1.0 - ADAM_BETA1**opt.count
    bc2 = 1.0 - ADAM_BETA2**opt.count
    lr, wd = config.learning_rate, config.weight_decay
    for name, tensor in params.tensors.items():
        g = grads[name]
        m = opt.m[name]
        v = opt.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        tensor.data = tensor.data - lr * (update + wd * tensor.data)


def train_step(
    params: ParameterStore,
    opt: AdamState,
    ema: EmaState,
    batch: tuple[np.ndarray, np.ndarray | None],
    rng: RngStream,
    config: TrainConfig,
    step: int = 0,
) -> float:
    """One optimization step on a (B, C) batch of clean count vectors.

    Per element: t ~ U(0,1), x1 from the multinomial noise prior, x_t from the
    constrained forward process, then one AdamW update on the mean
    cross-entropy of predicting x0 from x_t, followed by the EMA blend.
    """
    x0, labels = batch
    x0 = np.asarray(x0, dtype=np.int64)
    dcfg = params.config
    b = x0.shape[0]
    m = dcfg.num_tokens
    t = rng.gen.random(b)
    x1 = multinomial_noise_array(dcfg.codebook_size, m, rng, b)
    x_t = sample_forward_batch(x0, x1, t, m, rng, adjust=config.fixed_sum)
    eff_labels = None
    if labels is not None and dcfg.num_classes > 0:
        drop = rng.gen.random(b) < dcfg.label_drop_prob
        eff_labels = np.where(drop, -1, np.asarray(labels, dtype=np.int64))
    loss, grads = loss_and_grads(params, x_t, t, eff_labels, x0)
    if not math.isfinite(loss):
        digest = hashlib.sha1(x0.tobytes()).hexdigest()[:12]
        raise RuntimeError(
            f"non-finite loss {loss} at step {step}; t={np.round(t, 4).tolist()}; batch sha1={digest}"
        )
    _adamw_update(params, grads, opt, config)
    ema.update(params)
    return loss


def _save_bundle(path: str, params: ParameterStore, ema: EmaState, opt: AdamState, step: int) -> None:
    try:
        save_checkpoint(
            path,
            params.config,
            params.as_arrays(),
            {k: v.copy() for k, v in ema.shadow.items()},
            opt_m={k: v.copy() for k, v in opt.m.items()},
            opt_v={k: v.copy() for k, v in opt.v.items()},
            step=step,
        )
    except OSError as e:
        raise OSError(f"failed to write checkpoint {path!r}: {e}") from e


def fit(
    dataset: tuple[np.ndarray, np.ndarray | None],
    dcfg: DenoiserConfig,
    config: TrainConfig,
    resume_from: str | None = None,
) -> CheckpointBundle:
    """Run the training loop and write the final checkpoint.

    dataset is (x0 array (N, C), labels (N,) or None). Shuffling is a pure
    function of (seed, epoch); per-step noise is keyed by (seed, step), so a
    resumed run retraces the exact trajectory of an uninterrupted one.
    """
    x0s, labels = dataset
    x0s = np.asarray(x0s, dtype=np.int64)
    if x0s.ndim != 2 or x0s.shape[0] == 0:
        raise ConstraintError("dataset must be a non-empty (N, C) array")
    if x0s.shape[1] != dcfg.codebook_size:
        raise ConstraintError(f"dataset C={x0s.shape[1]} != config C={dcfg.codebook_size}")
    if np.any(x0s.sum(axis=1) != dcfg.num_tokens):
        raise ConstraintError(f"dataset rows must sum to M={dcfg.num_tokens}")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)

    if resume_from is not None:
        bundle = load_checkpoint(resume_from)
        params = bundle.build_params(use_ema=False)
        ema = EmaState({k: v.copy() for k, v in bundle.ema.items()}, config.ema_decay)
        opt = AdamState(
            {k: v.copy() for k, v in bundle.opt_m.items()},
            {k: v.copy() for k, v in bundle.opt_v.items()},
            bundle.step,
        )
        start = bundle.step
    else:
        params = init_params(dcfg, RngStream(config.seed, STREAM_INIT))
        ema = EmaState.from_params(params, config.ema_decay)
        opt = AdamState.from_params(params)
        start = 0

    n = x0s.shape[0]
    b = min(config.batch_size, n)
    batches_per_epoch = (n + b - 1) // b
    log_fh = None
    if config.log_path is not None:
        try:
            mode = "a" if resume_from is not None else "w"
            log_fh = open(config.log_path, mode, encoding="utf-8")
            if mode == "w":
                log_fh.write(LOG_HEADER + "\n")
        except OSError as e:
            raise OSError(f"failed to open training log {config.log_path!r}: {e}") from e

    ema_loss = None
    perm = None
    perm_epoch = -1
    try:
        for step in range(start, config.steps):
            epoch, pos = divmod(step, batches_per_epoch)
            if epoch != perm_epoch:
                perm = RngStream(config.seed, STREAM_SHUFFLE + epoch).gen.permutation(n)
                perm_epoch = epoch
            idx = perm[pos * b : (pos + 1) * b]
            batch = (x0s[idx], None if labels is None else labels[idx])
            rng = RngStream(config.seed, STREAM_STEP + step)
            t0 = time.perf_counter()
            loss = train_step(params, opt, ema, batch, rng, config, step=step)
            wall_ms = (time.perf_counter() - t0) * 1e3
            ema_loss = loss if ema_loss is None else _LOSS_SMOOTH * ema_loss + (1 - _LOSS_SMOOTH) * loss
            done = step + 1
            if log_fh is not None and (done % config.eval_every == 0 or done == config.steps):
                log_fh.write(f"{done},{loss!r},{ema_loss!r},{wall_ms:.3f}\n")
            if config.checkpoint_every and done % config.checkpoint_every == 0 and done < config.steps:
                _save_bundle(f"{config.checkpoint_path}.step{done}", params, ema, opt, done)
    finally:
        if log_fh is not None:
            log_fh.close()

    _save_bundle(config.checkpoint_path, params, ema, opt, config.steps)
    return load_checkpoint(config.checkpoint_path)
