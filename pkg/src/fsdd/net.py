"""The learnable denoiser: a compact attention network over the count sequence.

Each codebook position j is embedded from three additive pieces: a learned
embedding of its current count value, a learned positional embedding of j, and
shared time/class conditioning. A small pre-norm transformer stack maps these
to per-position logits over the count values {0..M}, parameterizing the
predicted clean vector given a noisy one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .codec import ConstraintError, CountVector
from .kernels import RngStream


@dataclass(frozen=True)
class DenoiserConfig:
    codebook_size: int
    num_tokens: int
    num_classes: int = 0
    embed_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    label_drop_prob: float = 0.1
    dtype: str = "float64"

    def __post_init__(self) -> None:
        if min(self.codebook_size, self.embed_dim, self.num_layers, self.num_heads) < 1:
            raise ConstraintError("all denoiser dimensions must be positive")
        if self.num_tokens < 0 or self.num_classes < 0:
            raise ConstraintError("num_tokens and num_classes must be non-negative")
        if self.embed_dim % self.num_heads != 0:
            raise ConstraintError(
                f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}"
            )
        if self.embed_dim % 2 != 0:
            raise ConstraintError("embed_dim must be even for the sinusoidal time features")
        if not 0.0 <= self.label_drop_prob < 1.0:
            raise ConstraintError(f"label_drop_prob {self.label_drop_prob} outside [0, 1)")
        if self.dtype not in ("float64", "float32"):
            raise ConstraintError(f"dtype must be float64 or float32, got {self.dtype}")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32


@dataclass(frozen=True)
class DenoiserLogits:
    """C x (M+1) score grid; row j scores each candidate count at position j."""

    grid: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        object.__setattr__(self, "grid", grid)
        if grid.ndim != 2:
            raise ConstraintError(f"logit grid must be 2-d, got shape {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise ConstraintError("logit grid contains non-finite entries")


class ParameterStore:
    """Named parameter tensors plus the config that fixes their shapes.

    Iteration order is the fixed construction order, which also defines the
    checkpoint layout and the deterministic gradient reduction order.
    """

    def __init__(self, config: DenoiserConfig, tensors: dict[str, ad.Tensor]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> ad.Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors.keys())

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.tensors.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self.tensors.items():
            src = np.asarray(arrays[k], dtype=t.data.dtype)
            if src.shape != t.data.shape:
                raise ConstraintError(f"parameter {k}: shape {src.shape} != {t.data.shape}")
            t.data = src.copy()


def parameter_shapes(config: DenoiserConfig) -> dict[str, tuple[int, ...]]:
    c, m, d = config.codebook_size, config.num_tokens, config.embed_dim
    h = 4 * d
    shapes: dict[str, tuple[int, ...]] = {
        "count_embed": (m + 1, d),
        "pos_embed": (c, d),
        "class_embed": (config.num_classes + 1, d),
        "time_w1": (d, d),
        "time_b1": (d,),
        "time_w2": (d, d),
        "time_b2": (d,),
    }
    for i in range(config.num_layers):
        p = f"layer{i}."
        shapes[p + "ln1_g"] = (d,)
        shapes[p + "ln1_b"] = (d,)
        shapes[p + "q_w"] = (d, d)
        shapes[p + "q_b"] = (d,)
        shapes[p + "k_w"] = (d, d)
        shapes[p + "k_b"] = (d,)
        shapes[p + "v_w"] = (d, d)
        shapes[p + "v_b"] = (d,)
        shapes[p + "attn_out_w"] = (d, d)
        shapes[p + "attn_out_b"] = (d,)
        shapes[p + "ln2_g"] = (d,)
        shapes[p + "ln2_b"] = (d,)
        shapes[p + "mlp_w1"] = (d, h)
        shapes[p + "mlp_b1"] = (h,)
        shapes[p + "mlp_w2"] = (h, d)
        shapes[p + "mlp_b2"] = (d,)
    shapes["ln_f_g"] = (d,)
    shapes["ln_f_b"] = (d,)
    shapes["head_w"] = (d, m + 1)
    shapes["head_b"] = (m + 1,)
    return shapes


def init_params(config: DenoiserConfig, rng: RngStream) -> ParameterStore:
    """Fresh parameters: 0.02-scaled normal weights, zero biases, unit norms."""
    dtype = config.np_dtype
    tensors: dict[str, ad.Tensor] = {}
    for name, shape in parameter_shapes(config).items():
        base = name.rsplit(".", 1)[-1]
        if base.endswith("_g"):
            data = np.ones(shape, dtype=dtype)
        elif base.endswith(("_b", "_b1", "_b2")):
            data = np.zeros(shape, dtype=dtype)
        else:
            data = (0.02 * rng.gen.standard_normal(shape)).astype(dtype)
        tensors[name] = ad.Tensor(data, requires_grad=True)
    return ParameterStore(config, tensors)


def time_features(t: np.ndarray, dim: int, dtype=np.float64) -> np.ndarray:
    """Sinusoidal features of scalar times in [0, 1], shape (B, dim)."""
    half = dim // 2
    span = max(half - 1, 1)
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / span)
    args = np.asarray(t, dtype=np.float64)[:, None] * 1000.0 * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1).astype(dtype)


def _linear(x: ad.Tensor, w: ad.Tensor, b: ad.Tensor) -> ad.Tensor:
    return ad.add(ad.matmul(x, w), b)


def _attention(x: ad.Tensor, params: ParameterStore, prefix: str) -> ad.Tensor:
    cfg = params.config
    b_sz, c, d = x.shape
    h = cfg.num_heads
    dh = d // h

    def split_heads(y: ad.Tensor) -> ad.Tensor:
        y = ad.reshape(y, (b_sz, c, h, dh))
        return ad.transpose(y, (0, 2, 1, 3))

    q = split_heads(_linear(x, params[prefix + "q_w"], params[prefix + "q_b"]))
    k = split_heads(_linear(x, params[prefix + "k_w"], params[prefix + "k_b"]))
    v = split_heads(_linear(x, params[prefix + "v_w"], params[prefix + "v_b"]))
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    att = ad.softmax(scores, axis=-1)
    out = ad.matmul(att, v)
    out = ad.reshape(ad.transpose(out, (0, 2, 1, 3)), (b_sz, c, d))
    return _linear(out, params[prefix + "attn_out_w"], params[prefix + "attn_out_b"])


def forward_graph(
    params: ParameterStore,
    x_t: np.ndarray,
    t: np.ndarray,
    labels: np.ndarray | None,
) -> ad.Tensor:
    """Batched forward pass returning the (B, C, M+1) logits node of the graph.

    labels is an int array where entries in [0, num_classes) select a class
    embedding and -1 selects the learned null (unconditional) embedding.
    """
    cfg = params.config
    x_t = np.asarray(x_t, dtype=np.int64)
    if x_t.ndim != 2 or x_t.shape[1] != cfg.codebook_size:
        raise ConstraintError(f"x_t shape {x_t.shape} incompatible with C={cfg.codebook_size}")
    if np.any(x_t < 0) or np.any(x_t > cfg.num_tokens):
        raise ConstraintError("x_t entries outside [0, M]")
    b_sz = x_t.shape[0]
    if labels is None:
        idx = np.full(b_sz, cfg.num_classes, dtype=np.int64)
    else:
        labels = np.asarray(labels, dtype=np.int64)
        if np.any(labels >= cfg.num_classes):
            raise ConstraintError("class label outside [0, num_classes)")
        idx = np.where(labels < 0, cfg.num_classes, labels)

    tok = ad.take_rows(params["count_embed"], x_t)
    feat = ad.Tensor(time_features(t, cfg.embed_dim, cfg.np_dtype))
    cond = _linear(ad.gelu(_linear(feat, params["time_w1"], params["time_b1"])),
                   params["time_w2"], params["time_b2"])
    cls = ad.take_rows(params["class_embed"], idx)
    cond = ad.reshape(ad.add(cond, cls), (b_sz, 1, cfg.embed_dim))
    x = ad.add(ad.add(tok, params["pos_embed"]), cond)
    for i in range(cfg.num_layers):
        p = f"layer{i}."
        normed = ad.layernorm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        x = ad.add(x, _attention(normed, params, p))
        normed = ad.layernorm(x, params[p + "ln2_g"], params[p + "ln2_b"])
        hidden = ad.gelu(_linear(normed, params[p + "mlp_w1"], params[p + "mlp_b1"]))
        x = ad.add(x, _linear(hidden, params[p + "mlp_w2"], params[p + "mlp_b2"]))
    x = ad.layernorm(x, params["ln_f_g"], params["ln_f_b"])
    return _linear(x, params["head_w"], params["head_b"])


def forward_batch(
    params: ParameterStore,
    x_t: np.ndarray,
    t: np.ndarray,
    labels: np.ndarray | None = None,
) -> np.ndarray:
    """Batched logits as a plain (B, C, M+1) array (no gradient graph kept)."""
    return forward_graph(params, x_t, t, labels).data


def forward(
    params: ParameterStore,
    x_t: CountVector,
    t: float,
    class_label: int | None = None,
) -> DenoiserLogits:
    """Single-sample denoiser evaluation."""
    if not 0.0 <= t <= 1.0:
        raise ConstraintError(f"t={t} outside [0, 1]")
    labels = None if class_label is None else np.array([class_label])
    grid = forward_batch(params, x_t.to_array()[None, :], np.array([t]), labels)[0]
    return DenoiserLogits(grid)


def cross_entropy_loss(logits: DenoiserLogits, x0: CountVector) -> float:
    """Mean over positions of -log softmax(logits[j])[x0[j]]."""
    node = ad.cross_entropy(ad.Tensor(logits.grid), x0.to_array())
    return float(node.data)


def loss_and_grads(
    params: ParameterStore,
    x_t: np.ndarray,
    t: np.ndarray,
    labels: np.ndarray | None,
    x0: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and exact gradients for every parameter."""
    params.zero_grad()
    logits = forward_graph(params, x_t, t, labels)
    loss = ad.cross_entropy(logits, np.asarray(x0, dtype=np.int64))
    loss.backward()
    grads = {
        name: (tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data))
        for name, tensor in params.tensors.items()
    }
    return float(loss.data), grads


def backward(
    params: ParameterStore,
    x_t: CountVector,
    t: float,
    class_label: int | None,
    x0: CountVector,
) -> dict[str, np.ndarray]:
    """Gradients of the single-sample cross-entropy loss for every parameter."""
    labels = None if class_label is None else np.array([class_label])
    _, grads = loss_and_grads(
        params, x_t.to_array()[None, :], np.array([t]), labels, x0.to_array()[None, :]
    )
    return grads
