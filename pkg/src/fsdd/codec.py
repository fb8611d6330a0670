"""Lossless conversion between unordered token multisets and fixed-sum count vectors.

A bag of M codebook indices drawn from {0, ..., C-1} can be stored either as
the unordered collection of indices or as the length-C vector of per-index
multiplicities. Both carry the same information; the count form adds three
structural guarantees: fixed length C, integer entries in [0, M], and a total
that equals M exactly.

This module also owns the two text file formats used everywhere else:

  token-set file:    header line ``C=<int> M=<int>``, then one image per line
                     with exactly M space-separated token indices.
  count-vector file: same header, then one image per line with exactly C
                     space-separated counts summing to M.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class ConstraintError(ValueError):
    """A value violates a structural invariant (range, length, or fixed sum)."""


class FormatError(ValueError):
    """A file or config does not conform to its documented text format."""


@dataclass(frozen=True)
class TokenMultiset:
    """Unordered collection of token indices, each in [0, codebook_size).

    Construction order is irrelevant: tokens are canonicalized to ascending
    order, so two multisets with equal multiplicity profiles compare equal.
    """

    tokens: tuple[int, ...]
    codebook_size: int

    def __post_init__(self) -> None:
        toks = tuple(sorted(int(t) for t in self.tokens))
        object.__setattr__(self, "tokens", toks)
        c = int(self.codebook_size)
        object.__setattr__(self, "codebook_size", c)
        if c < 1:
            raise ConstraintError(f"codebook_size must be positive, got {c}")
        if toks and (toks[0] < 0 or toks[-1] >= c):
            bad = toks[0] if toks[0] < 0 else toks[-1]
            raise ConstraintError(f"token {bad} outside [0, {c})")

    @property
    def cardinality(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class CountVector:
    """Length-C vector of non-negative counts whose entries sum to target_sum."""

    counts: tuple[int, ...]
    target_sum: int

    def __post_init__(self) -> None:
        cnts = tuple(int(v) for v in self.counts)
        object.__setattr__(self, "counts", cnts)
        m = int(self.target_sum)
        object.__setattr__(self, "target_sum", m)
        if len(cnts) < 1:
            raise ConstraintError("counts must have at least one entry")
        if m < 0:
            raise ConstraintError(f"target_sum must be non-negative, got {m}")
        for v in cnts:
            if v < 0 or v > m:
                raise ConstraintError(f"count {v} outside [0, {m}]")
        total = sum(cnts)
        if total != m:
            raise ConstraintError(f"counts sum to {total}, expected {m}")

    @property
    def size(self) -> int:
        return len(self.counts)

    def to_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    @classmethod
    def from_array(cls, arr: Sequence[int] | np.ndarray, target_sum: int) -> "CountVector":
        return cls(tuple(int(v) for v in np.asarray(arr).reshape(-1)), target_sum)


def set_to_counts(s: TokenMultiset) -> CountVector:
    """Tally each token's multiplicity into a fixed-sum count vector."""
    counts = np.bincount(np.array(s.tokens, dtype=np.int64), minlength=s.codebook_size)
    return CountVector(tuple(int(v) for v in counts), len(s.tokens))


def counts_to_set(x: CountVector) -> TokenMultiset:
    """Expand a count vector back into its token multiset.

    Elements are emitted in ascending token-index order; callers must treat
    the result as unordered.
    """
    arr = x.to_array()
    tokens = np.repeat(np.arange(arr.size, dtype=np.int64), arr)
    return TokenMultiset(tuple(int(t) for t in tokens), arr.size)


def random_permutation(s: TokenMultiset, seed: int) -> tuple[int, ...]:
    """Deterministically shuffle the multiset's elements into a sequence."""
    gen = np.random.default_rng(seed)
    order = gen.permutation(len(s.tokens))
    toks = np.array(s.tokens, dtype=np.int64)
    return tuple(int(t) for t in toks[order])


# ---------------------------------------------------------------------------
# Text file formats


def _parse_header(line: str, path: str, lineno: int) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2 or not parts[0].startswith("C=") or not parts[1].startswith("M="):
        raise FormatError(f"{path}:{lineno}: expected header 'C=<int> M=<int>', got {line!r}")
    try:
        c = int(parts[0][2:])
        m = int(parts[1][2:])
    except ValueError:
        raise FormatError(f"{path}:{lineno}: non-integer C or M in header {line!r}") from None
    if c < 1 or m < 0:
        raise FormatError(f"{path}:{lineno}: header values out of range (C={c}, M={m})")
    return c, m


def _parse_int_row(line: str, path: str, lineno: int) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise FormatError(f"{path}:{lineno}: non-integer value in {line!r}") from None


def read_token_file(path: str) -> tuple[int, int, list[TokenMultiset]]:
    """Parse a token-set file, validating every line against the header."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}:1: empty file, expected header")
    c, m = _parse_header(lines[0], path, 1)
    out: list[TokenMultiset] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = _parse_int_row(line, path, i)
        if len(row) != m:
            raise FormatError(f"{path}:{i}: expected {m} tokens, got {len(row)}")
        try:
            out.append(TokenMultiset(tuple(row), c))
        except ConstraintError as e:
            raise FormatError(f"{path}:{i}: {e}") from None
    return c, m, out


def write_token_file(path: str, multisets: Iterable[TokenMultiset], codebook_size: int, cardinality: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"C={codebook_size} M={cardinality}\n")
        for s in multisets:
            if s.codebook_size != codebook_size or len(s) != cardinality:
                raise ConstraintError(
                    f"multiset with C={s.codebook_size}, M={len(s)} does not match "
                    f"header C={codebook_size}, M={cardinality}"
                )
            fh.write(" ".join(str(t) for t in s.tokens) + "\n")


def read_count_file(path: str) -> tuple[int, int, list[CountVector]]:
    """Parse a count-vector file, validating every line against the header."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}:1: empty file, expected header")
    c, m = _parse_header(lines[0], path, 1)
    out: list[CountVector] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = _parse_int_row(line, path, i)
        if len(row) != c:
            raise FormatError(f"{path}:{i}: expected {c} counts, got {len(row)}")
        try:
            out.append(CountVector(tuple(row), m))
        except ConstraintError as e:
            raise FormatError(f"{path}:{i}: {e}") from None
    return c, m, out


def write_count_file(path: str, vectors: Iterable[CountVector], codebook_size: int, cardinality: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"C={codebook_size} M={cardinality}\n")
        for x in vectors:
            if x.size != codebook_size or x.target_sum != cardinality:
                raise ConstraintError(
                    f"count vector with C={x.size}, M={x.target_sum} does not match "
                    f"header C={codebook_size}, M={cardinality}"
                )
            fh.write(" ".join(str(v) for v in x.counts) + "\n")
