"""Synthetic fixed-sum distributions with known ground truth, plus token-file
ingestion. These stand in for an external tokenizer's output distribution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import gammaln

from .codec import ConstraintError, CountVector, TokenMultiset, read_token_file
from .kernels import RngStream, multinomial_noise_array
from .metrics import ENUMERATION_LIMIT, count_compositions, enumerate_count_vectors

STREAM_DATA = 5 << 40
STREAM_ANCHORS = 6 << 40

KINDS = ("two_point", "dirichlet_multinomial", "class_conditional_two_point")


@dataclass(frozen=True)
class SyntheticSpec:
    """Description of one ground-truth distribution over count vectors."""

    kind: str
    codebook_size: int
    num_tokens: int
    seed: int = 0
    anchors: tuple[CountVector, CountVector] | None = None
    mixture_weight: float = 0.5
    alpha: float = 1.0
    num_classes: int = 0
    class_anchors: tuple[tuple[CountVector, CountVector], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConstraintError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.codebook_size < 1 or self.num_tokens < 0:
            raise ConstraintError("need C >= 1 and M >= 0")
        if not 0.0 < self.mixture_weight < 1.0:
            raise ConstraintError(f"mixture_weight {self.mixture_weight} outside (0, 1)")
        if self.alpha <= 0:
            raise ConstraintError(f"alpha must be positive, got {self.alpha}")
        if self.kind == "two_point":
            anchors = self.anchors or two_point_anchors(
                self.codebook_size, self.num_tokens, self.seed
            )
            self._check_anchor_pair(anchors)
            object.__setattr__(self, "anchors", anchors)
        if self.kind == "class_conditional_two_point":
            if self.num_classes < 1:
                raise ConstraintError("class_conditional_two_point needs num_classes >= 1")
            pairs = self.class_anchors or tuple(
                two_point_anchors(self.codebook_size, self.num_tokens, self.seed, salt=c)
                for c in range(self.num_classes)
            )
            if len(pairs) != self.num_classes:
                raise ConstraintError(
                    f"need one anchor pair per class, got {len(pairs)} for {self.num_classes}"
                )
            for pair in pairs:
                self._check_anchor_pair(pair)
            object.__setattr__(self, "class_anchors", tuple(pairs))

    def _check_anchor_pair(self, pair) -> None:
        for a in pair:
            if a.size != self.codebook_size or a.target_sum != self.num_tokens:
                raise ConstraintError(
                    f"anchor with C={a.size}, M={a.target_sum} does not match the spec"
                )


def two_point_anchors(
    c: int, m: int, seed: int, salt: int = 0
) -> tuple[CountVector, CountVector]:
    """Two distinct multinomial draws; deterministic in (seed, salt)."""
    rng = RngStream(seed, STREAM_ANCHORS + salt)
    a = multinomial_noise_array(c, m, rng)
    for _ in range(1000):
        b = multinomial_noise_array(c, m, rng)
        if not np.array_equal(a, b):
            return CountVector.from_array(a, m), CountVector.from_array(b, m)
    raise ConstraintError(
        f"could not find two distinct anchors for C={c}, M={m}; space too small"
    )


def sample_dataset_arrays(
    spec: SyntheticSpec, n: int
) -> tuple[np.ndarray, np.ndarray | None]:
    """n i.i.d. draws as an (n, C) int array plus labels when the spec is labeled."""
    if n < 1:
        raise ConstraintError(f"need n >= 1, got {n}")
    rng = RngStream(spec.seed, STREAM_DATA)
    c, m = spec.codebook_size, spec.num_tokens
    if spec.kind == "two_point":
        a, b = spec.anchors
        pick_a = rng.gen.random(n) < spec.mixture_weight
        out = np.where(pick_a[:, None], a.to_array()[None, :], b.to_array()[None, :])
        return out.astype(np.int64), None
    if spec.kind == "dirichlet_multinomial":
        probs = rng.gen.dirichlet(np.full(c, spec.alpha), size=n)
        out = np.empty((n, c), dtype=np.int64)
        for i in range(n):
            out[i] = rng.gen.multinomial(m, probs[i])
        return out, None
    labels = rng.gen.integers(0, spec.num_classes, size=n)
    pick_a = rng.gen.random(n) < spec.mixture_weight
    out = np.empty((n, c), dtype=np.int64)
    for i in range(n):
        pair = spec.class_anchors[labels[i]]
        out[i] = pair[0 if pick_a[i] else 1].to_array()
    return out, labels.astype(np.int64)


def sample_dataset(
    spec: SyntheticSpec, n: int
) -> tuple[list[CountVector], list[int] | None]:
    """Typed variant of sample_dataset_arrays; every draw satisfies the fixed sum."""
    arr, labels = sample_dataset_arrays(spec, n)
    vectors = [CountVector.from_array(row, spec.num_tokens) for row in arr]
    return vectors, None if labels is None else [int(v) for v in labels]


def load_token_file(path: str) -> tuple[int, int, list[TokenMultiset]]:
    """Read a token-set text file; malformed lines raise with their line number."""
    return read_token_file(path)


def _two_atom_pmf(pair, weight: float) -> dict[tuple[int, ...], float]:
    a, b = pair
    return {a.counts: weight, b.counts: 1.0 - weight}


def exact_pmf(spec: SyntheticSpec) -> dict[tuple[int, ...], float]:
    """Ground-truth pmf over count vectors; enumerates the support when needed."""
    if spec.kind == "two_point":
        return _two_atom_pmf(spec.anchors, spec.mixture_weight)
    if spec.kind == "class_conditional_two_point":
        pmf: dict[tuple[int, ...], float] = {}
        share = 1.0 / spec.num_classes
        for pair in spec.class_anchors:
            for atom, p in _two_atom_pmf(pair, spec.mixture_weight).items():
                pmf[atom] = pmf.get(atom, 0.0) + share * p
        return pmf
    c, m, a = spec.codebook_size, spec.num_tokens, spec.alpha
    if count_compositions(c, m) > ENUMERATION_LIMIT:
        raise ValueError(
            f"dirichlet-multinomial support for C={c}, M={m} is too large to enumerate"
        )
    log_norm = gammaln(m + 1) + gammaln(c * a) - gammaln(m + c * a) - c * gammaln(a)
    pmf = {}
    for atom in enumerate_count_vectors(c, m):
        x = np.array(atom, dtype=np.float64)
        logp = log_norm + np.sum(gammaln(x + a) - gammaln(x + 1))
        pmf[atom] = float(np.exp(logp))
    return pmf


def class_pmfs(spec: SyntheticSpec) -> dict[int, Mapping]:
    """Per-class ground truth for class-conditional specs."""
    if spec.kind != "class_conditional_two_point":
        raise ConstraintError(f"per-class pmfs undefined for kind {spec.kind!r}")
    return {
        c: _two_atom_pmf(pair, spec.mixture_weight)
        for c, pair in enumerate(spec.class_anchors)
    }
