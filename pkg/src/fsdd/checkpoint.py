"""Binary checkpoint format for the denoiser.

Layout (all integers little-endian):

  magic        4 bytes  b"FSDD"
  version      uint32   currently 1
  header_len   uint32
  header       UTF-8 JSON: denoiser config fields, training step, extras
  tensor_count uint32
  per tensor:  name_len uint16, name UTF-8, ndim uint8,
               dims uint64 each, data float64 little-endian (C order)

Tensors are written in a fixed group order (params, ema, opt_m, opt_v) with
names sorted within each group, and the header JSON uses sorted keys, so a
save -> load -> save round trip is byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .codec import FormatError
from .net import DenoiserConfig, ParameterStore, init_params, parameter_shapes
from .kernels import RngStream

MAGIC = b"FSDD"
VERSION = 1
_GROUPS = ("params", "ema", "opt_m", "opt_v")


@dataclass
class CheckpointBundle:
    config: DenoiserConfig
    params: dict[str, np.ndarray]
    ema: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray] = field(default_factory=dict)
    opt_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    meta: dict = field(default_factory=dict)

    def build_params(self, use_ema: bool = True) -> ParameterStore:
        """Materialize a ParameterStore from the stored (EMA by default) weights."""
        store = init_params(self.config, RngStream(0, 0))
        store.load_arrays(self.ema if use_ema else self.params)
        return store


def _write_tensor(fh, name: str, arr: np.ndarray) -> None:
    data = np.ascontiguousarray(arr, dtype="<f8")
    nb = name.encode("utf-8")
    fh.write(struct.pack("<H", len(nb)))
    fh.write(nb)
    fh.write(struct.pack("<B", data.ndim))
    for d in data.shape:
        fh.write(struct.pack("<Q", d))
    fh.write(data.tobytes())


def save_checkpoint(
    path: str,
    config: DenoiserConfig,
    params: dict[str, np.ndarray],
    ema: dict[str, np.ndarray],
    opt_m: dict[str, np.ndarray] | None = None,
    opt_v: dict[str, np.ndarray] | None = None,
    step: int = 0,
    meta: dict | None = None,
) -> None:
    """Write atomically (temp file then rename)."""
    groups = {"params": params, "ema": ema, "opt_m": opt_m or {}, "opt_v": opt_v or {}}
    header = {
        "config": dataclasses.asdict(config),
        "step": int(step),
        "meta": meta or {},
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    n_tensors = sum(len(g) for g in groups.values())
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        fh.write(struct.pack("<I", n_tensors))
        for group in _GROUPS:
            for name in sorted(groups[group]):
                _write_tensor(fh, f"{group}/{name}", groups[group][name])
    os.replace(tmp, path)


def _read_exact(fh, n: int, path: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"{path}: truncated checkpoint (wanted {n} bytes, got {len(buf)})")
    return buf


def load_checkpoint(path: str) -> CheckpointBundle:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path) != MAGIC:
            raise FormatError(f"{path}: bad magic, not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path))
        if version != VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", _read_exact(fh, 4, path))
        header = json.loads(_read_exact(fh, hlen, path).decode("utf-8"))
        config = DenoiserConfig(**header["config"])
        (n_tensors,) = struct.unpack("<I", _read_exact(fh, 4, path))
        groups: dict[str, dict[str, np.ndarray]] = {g: {} for g in _GROUPS}
        for _ in range(n_tensors):
            (nlen,) = struct.unpack("<H", _read_exact(fh, 2, path))
            full = _read_exact(fh, nlen, path).decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, path))
            shape = tuple(
                struct.unpack("<Q", _read_exact(fh, 8, path))[0] for _ in range(ndim)
            )
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            data = np.frombuffer(_read_exact(fh, 8 * count, path), dtype="<f8").reshape(shape)
            group, _, name = full.partition("/")
            if group not in groups or not name:
                raise FormatError(f"{path}: unknown tensor group in {full!r}")
            groups[group][name] = data.astype(np.float64)
    expected = set(parameter_shapes(config))
    for g in ("params", "ema"):
        if set(groups[g]) != expected:
            raise FormatError(f"{path}: tensor group {g!r} does not match the config's shapes")
    return CheckpointBundle(
        config=config,
        params=groups["params"],
        ema=groups["ema"],
        opt_m=groups["opt_m"],
        opt_v=groups["opt_v"],
        step=int(header.get("step", 0)),
        meta=header.get("meta", {}),
    )


def describe_checkpoint(path: str) -> dict:
    """Header plus per-tensor shape/statistics summary for inspection."""
    bundle = load_checkpoint(path)
    tensors = {}
    for group in _GROUPS:
        for name, arr in sorted(getattr(bundle, group).items()):
            tensors[f"{group}/{name}"] = {
                "shape": list(arr.shape),
                "l2": float(np.linalg.norm(arr)),
            }
    return {
        "config": dataclasses.asdict(bundle.config),
        "step": bundle.step,
        "meta": bundle.meta,
        "tensors": tensors,
    }
