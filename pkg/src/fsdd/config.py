"""Experiment configuration: a flat ``key = value`` text format with strict keys.

Lines are ``key = value`` with ``#`` comments and blank lines ignored. Unknown
keys are rejected up front so typos cannot silently change an experiment.
Command-line flags override file values; defaults fill the rest.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codec import ConstraintError, CountVector, FormatError
from .data import SyntheticSpec
from .net import DenoiserConfig
from .sampler import SampleConfig
from .trainer import TrainConfig

_INT_KEYS = {
    "C", "M", "num_classes", "embed_dim", "num_layers", "num_heads",
    "steps", "batch_size", "eval_every", "checkpoint_every", "seed",
    "n_train", "data_seed", "num_steps", "class_label",
}
_FLOAT_KEYS = {
    "label_drop_prob", "learning_rate", "weight_decay", "ema_decay",
    "mixture_weight", "alpha", "top_p", "guidance_scale",
}
_BOOL_KEYS = {"fixed_sum"}
_STR_KEYS = {"dtype", "checkpoint_path", "log_path", "data_path", "kind", "schedule_f"}
_LIST_KEYS = {"anchor_a", "anchor_b"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS | _LIST_KEYS


def parse_config_file(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise OSError(f"cannot read config {path!r}: {e}") from e
    out: dict[str, str] = {}
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{i}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise FormatError(f"{path}:{i}: unknown config key {key!r}")
        if not value:
            raise FormatError(f"{path}:{i}: empty value for {key!r}")
        if key in out:
            raise FormatError(f"{path}:{i}: duplicate key {key!r}")
        out[key] = value
    return out


def merge(file_values: dict[str, str], overrides: dict[str, object]) -> dict[str, object]:
    """Typed view of a config: file values coerced, then overrides applied on top."""
    merged: dict[str, object] = {}
    for key, raw in file_values.items():
        merged[key] = _coerce(key, raw)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConstraintError(f"unknown config key {key!r}")
        merged[key] = _coerce(key, value) if isinstance(value, str) else value
    return merged


def _coerce(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if key in _LIST_KEYS:
            return tuple(int(v) for v in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise FormatError(f"config key {key!r}: cannot parse value {raw!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """A full experiment: model shape, training recipe, data law, sampling recipe."""

    denoiser: DenoiserConfig
    train: TrainConfig
    data_spec: SyntheticSpec | None
    sample: SampleConfig
    n_train: int
    data_path: str | None


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConstraintError(f"config is missing required key {key!r}")
    return cfg[key]


def denoiser_config(cfg: dict) -> DenoiserConfig:
    return DenoiserConfig(
        codebook_size=_require(cfg, "C"),
        num_tokens=_require(cfg, "M"),
        num_classes=cfg.get("num_classes", 0),
        embed_dim=cfg.get("embed_dim", 64),
        num_layers=cfg.get("num_layers", 2),
        num_heads=cfg.get("num_heads", 4),
        label_drop_prob=cfg.get("label_drop_prob", 0.1),
        dtype=cfg.get("dtype", "float64"),
    )


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        steps=_require(cfg, "steps"),
        batch_size=cfg.get("batch_size", 64),
        learning_rate=cfg.get("learning_rate", 1e-3),
        weight_decay=cfg.get("weight_decay", 1e-4),
        ema_decay=cfg.get("ema_decay", 0.999),
        seed=cfg.get("seed", 0),
        eval_every=cfg.get("eval_every", 1),
        checkpoint_path=cfg.get("checkpoint_path", "model.ckpt"),
        checkpoint_every=cfg.get("checkpoint_every", 0),
        log_path=cfg.get("log_path"),
        fixed_sum=cfg.get("fixed_sum", True),
    )


def synthetic_spec(cfg: dict) -> SyntheticSpec:
    c = _require(cfg, "C")
    m = _require(cfg, "M")
    anchors = None
    if "anchor_a" in cfg or "anchor_b" in cfg:
        if not ("anchor_a" in cfg and "anchor_b" in cfg):
            raise ConstraintError("anchor_a and anchor_b must be given together")
        anchors = (
            CountVector(tuple(cfg["anchor_a"]), m),
            CountVector(tuple(cfg["anchor_b"]), m),
        )
    return SyntheticSpec(
        kind=_require(cfg, "kind"),
        codebook_size=c,
        num_tokens=m,
        seed=cfg.get("data_seed", cfg.get("seed", 0)),
        anchors=anchors,
        mixture_weight=cfg.get("mixture_weight", 0.5),
        alpha=cfg.get("alpha", 1.0),
        num_classes=cfg.get("num_classes", 0),
    )


def sample_config(cfg: dict) -> SampleConfig:
    return SampleConfig(
        num_steps=cfg.get("num_steps", 25),
        top_p=cfg.get("top_p", 0.95),
        guidance_scale=cfg.get("guidance_scale", 0.0),
        schedule_f=cfg.get("schedule_f", "linear"),
        seed=cfg.get("seed", 0),
        class_label=cfg.get("class_label"),
    )


def run_config(cfg: dict) -> RunConfig:
    data_spec = synthetic_spec(cfg) if "kind" in cfg else None
    return RunConfig(
        denoiser=denoiser_config(cfg),
        train=train_config(cfg),
        data_spec=data_spec,
        sample=sample_config(cfg),
        n_train=cfg.get("n_train", 4096),
        data_path=cfg.get("data_path"),
    )
