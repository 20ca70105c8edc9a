"""Permutations and r-local (block-diagonal) permutations.

A permutation of size s is stored as an index map: ``map[i]`` is the column
of the single nonzero entry in row i of the s x s permutation matrix, so
applying it to a matrix moves input row ``map[i]`` into output row i.  An
r-local permutation of n = r * (n/r) elements is a list of n/r independent
size-r blocks; its dense expansion is block diagonal, block k covering rows
{k*r, ..., k*r + r - 1}.

Permutations are stored as index maps, never dense matrices (``to_dense``
exists for debugging only): O(n) storage, O(n*m) application.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Permutation:
    """A permutation of {0, ..., s-1} in index-map form."""

    map: tuple[int, ...]

    def __post_init__(self):
        s = len(self.map)
        if sorted(self.map) != list(range(s)):
            raise ValueError(f"not a bijection on 0..{s - 1}: {self.map}")

    @classmethod
    def identity(cls, s: int) -> "Permutation":
        return cls(tuple(range(s)))

    @classmethod
    def from_map(cls, map: Iterable[int]) -> "Permutation":
        return cls(tuple(int(i) for i in map))

    @property
    def size(self) -> int:
        return len(self.map)

    def __len__(self) -> int:
        return len(self.map)

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.map)
        for i, j in enumerate(self.map):
            inv[j] = i
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """Return the permutation acting like self after other.

        In matrix form, ``(self.compose(other)).matrix == self.matrix @
        other.matrix``, i.e. the map is other.map[self.map[i]].
        """
        if len(other) != len(self):
            raise ValueError("size mismatch in compose")
        return Permutation(tuple(other.map[j] for j in self.map))

    def to_dense(self) -> np.ndarray:
        """Dense matrix expansion (debug helper)."""
        s = len(self.map)
        M = np.zeros((s, s))
        M[np.arange(s), list(self.map)] = 1.0
        return M

    def apply(self, M: np.ndarray) -> np.ndarray:
        M = np.asarray(M)
        if M.shape[0] != len(self.map):
            raise ValueError(f"row count {M.shape[0]} != permutation size {len(self.map)}")
        return M[list(self.map)]


@dataclass(frozen=True)
class RLocalPermutation:
    """Block-diagonal permutation: n/r independent blocks of size r."""

    r: int
    blocks: tuple[Permutation, ...]

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("block size must be positive")
        for b in self.blocks:
            if len(b) != self.r:
                raise ValueError(f"block of size {len(b)} in r={self.r} permutation")

    @property
    def n(self) -> int:
        return self.r * len(self.blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @classmethod
    def identity(cls, n: int, r: int) -> "RLocalPermutation":
        _check_divides(n, r)
        return cls(r, tuple(Permutation.identity(r) for _ in range(n // r)))

    def map_global(self, i: int) -> int:
        """Global row map: output row i takes input row map_global(i)."""
        k, off = divmod(i, self.r)
        return k * self.r + self.blocks[k].map[off]

    def as_global_map(self) -> np.ndarray:
        out = np.empty(self.n, dtype=np.int64)
        for k, b in enumerate(self.blocks):
            out[k * self.r : (k + 1) * self.r] = k * self.r + np.asarray(b.map)
        return out

    def inverse(self) -> "RLocalPermutation":
        return RLocalPermutation(self.r, tuple(b.inverse() for b in self.blocks))

    def compose(self, other: "RLocalPermutation") -> "RLocalPermutation":
        if other.n != self.n or other.r != self.r:
            raise ValueError("size mismatch in compose")
        return RLocalPermutation(
            self.r, tuple(a.compose(b) for a, b in zip(self.blocks, other.blocks))
        )

    def to_dense(self) -> np.ndarray:
        """Dense n x n expansion (debug helper)."""
        M = np.zeros((self.n, self.n))
        M[np.arange(self.n), self.as_global_map()] = 1.0
        return M

    def to_json(self) -> str:
        return json.dumps({"r": self.r, "blocks": [list(b.map) for b in self.blocks]})

    @classmethod
    def from_json(cls, text: str) -> "RLocalPermutation":
        obj = json.loads(text)
        return cls(int(obj["r"]), tuple(Permutation.from_map(b) for b in obj["blocks"]))


def _check_divides(n: int, r: int):
    if n < 1 or r < 1:
        raise ValueError(f"n={n}, r={r} must be positive")
    if n % r != 0:
        raise ValueError(f"block size r={r} does not divide n={n}")


def sample_permutation(s: int, rng: np.random.Generator) -> Permutation:
    """Uniform draw from the s! permutations (Fisher-Yates)."""
    return Permutation(tuple(int(i) for i in rng.permutation(s)))


def sample_rlocal(n: int, r: int, rng: np.random.Generator) -> RLocalPermutation:
    """Uniform r-local permutation: each block i.i.d. uniform over r! choices."""
    _check_divides(n, r)
    return RLocalPermutation(r, tuple(sample_permutation(r, rng) for _ in range(n // r)))


def apply(perm: RLocalPermutation, M: np.ndarray) -> np.ndarray:
    """Row-permute M: output row i is input row perm.map_global(i).

    Accepts an (n, m) matrix or an (n,) vector.
    """
    M = np.asarray(M)
    if M.shape[0] != perm.n:
        raise ValueError(f"row count {M.shape[0]} != permutation size {perm.n}")
    return M[perm.as_global_map()]


def inverse(perm: RLocalPermutation) -> RLocalPermutation:
    return perm.inverse()


def hamming_distortion(a: RLocalPermutation, b: RLocalPermutation) -> int:
    """Number of rows the two permutations assign differently."""
    if a.n != b.n or a.r != b.r:
        raise ValueError(f"size mismatch: ({a.n},{a.r}) vs ({b.n},{b.r})")
    return int(np.count_nonzero(a.as_global_map() != b.as_global_map()))


def frac_hamming(a: RLocalPermutation, b: RLocalPermutation) -> float:
    """Fractional Hamming distortion, hamming_distortion / n."""
    return hamming_distortion(a, b) / a.n
