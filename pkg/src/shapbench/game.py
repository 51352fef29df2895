"""Cooperative games over features, coalition enumeration and the Shapley kernel.

Coalitions are int64 bitmasks (bit i set means feature i is present) or, in
bulk, ``(n, M)`` uint8 indicator matrices. The two are converted with
``kernels.bits_to_masks`` / ``kernels.masks_to_bits``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from shapbench import kernels

MAX_ENUMERATION_FEATURES = 25
MAX_BITMASK_FEATURES = 62
_CHUNK_ROWS = 1 << 18


class BudgetError(ValueError):
    pass


def _check_enumerable(m: int) -> None:
    if m > MAX_ENUMERATION_FEATURES:
        raise BudgetError(
            f"enumerating 2^{m} coalitions exceeds the budget (at most {MAX_ENUMERATION_FEATURES} features)"
        )


def enumerate_coalitions(n_features: int) -> np.ndarray:
    """All 2^M bitmasks in ascending order."""
    _check_enumerable(n_features)
    return np.arange(1 << n_features, dtype=np.int64)


class Game:
    """Base class. Subclasses implement ``_compute(bits) -> values``."""

    n_features: int

    def values(self, bits) -> np.ndarray:
        bits = np.atleast_1d(np.asarray(bits, dtype=np.int64))
        return self._compute(bits)

    def value(self, bits: int) -> float:
        return float(self.values([bits])[0])

    def values_masks(self, masks: np.ndarray) -> np.ndarray:
        return self.values(kernels.masks_to_bits(masks))

    @property
    def full_bits(self) -> int:
        return (1 << self.n_features) - 1

    def grand(self) -> float:
        return self.value(self.full_bits)

    def empty(self) -> float:
        return self.value(0)

    def _compute(self, bits: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class TableGame(Game):
    """A game given by an explicit value table indexed by bitmask."""

    def __init__(self, table):
        table = np.asarray(table, dtype=np.float64).reshape(-1)
        m = int(round(math.log2(table.shape[0]))) if table.shape[0] else -1
        if m < 0 or table.shape[0] != 1 << m:
            raise ValueError(f"table length {table.shape[0]} is not a power of two")
        self.table = table
        self.n_features = m

    def _compute(self, bits):
        return self.table[bits]


class FunctionGame(Game):
    """Wraps ``fn(masks: (n, M) uint8) -> (n,)``."""

    def __init__(self, fn, n_features: int):
        self.fn = fn
        self.n_features = n_features

    def _compute(self, bits):
        return np.asarray(self.fn(kernels.bits_to_masks(bits, self.n_features)), dtype=np.float64)


class CoalitionGame(Game):
    """Interventional value function of a model around one instance.

    ``v(S)`` is the target-class output averaged over background rows, with
    features in S taken from ``x`` and the rest from the background row.
    Values for every class are cached per coalition.
    """

    def __init__(self, model, x, background, target_class: int | None = None):
        self.model = model
        self.x = np.asarray(x, dtype=np.float64).reshape(-1)
        self.background = np.array(background, dtype=np.float64, ndmin=2)
        if self.background.shape[0] == 0:
            raise ValueError("background set is empty")
        if self.background.shape[1] != self.x.shape[0]:
            raise ValueError(
                f"background has {self.background.shape[1]} features, instance has {self.x.shape[0]}"
            )
        self.n_features = self.x.shape[0]
        if self.n_features > MAX_BITMASK_FEATURES:
            raise BudgetError(f"at most {MAX_BITMASK_FEATURES} features are supported")
        self._cache: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        if target_class is None:
            target_class = int(np.argmax(model.predict_proba(self.x[None, :])[0]))
        self.target_class = int(target_class)

    def _evaluate(self, masks: np.ndarray) -> np.ndarray:
        nb = self.background.shape[0]
        per_chunk = max(1, _CHUNK_ROWS // nb)
        out = []
        for start in range(0, masks.shape[0], per_chunk):
            chunk = masks[start:start + per_chunk]
            inputs = kernels.impute(chunk, self.x, self.background)
            preds = self.model.predict_proba(inputs)
            out.append(preds.reshape(chunk.shape[0], nb, -1).mean(axis=1))
        return np.concatenate(out, axis=0)

    def values_all(self, bits) -> np.ndarray:
        """``(n, K)`` value vectors for every output class."""
        bits = np.atleast_1d(np.asarray(bits, dtype=np.int64))
        with self._lock:
            missing = sorted({int(b) for b in bits} - self._cache.keys())
        if missing:
            miss = np.array(missing, dtype=np.int64)
            vals = self._evaluate(kernels.bits_to_masks(miss, self.n_features))
            with self._lock:
                for b, v in zip(missing, vals):
                    self._cache.setdefault(b, v)
        with self._lock:
            return np.stack([self._cache[int(b)] for b in bits])

    def _compute(self, bits):
        return self.values_all(bits)[:, self.target_class]

    def reference_values(self, masks: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Target-class output with coalition k imputed from background row ``rows[k]`` only."""
        inputs = kernels.impute_rows(masks, self.x, self.background[np.asarray(rows)])
        return self.model.predict_proba(inputs)[:, self.target_class]

    @property
    def cache_size(self) -> int:
        return len(self._cache)


def shapley_kernel_weight(n_features: int, size: int) -> float:
    """(M-1) / (C(M,s) s (M-s)) for 1 <= s <= M-1."""
    m = n_features
    if not 1 <= size <= m - 1:
        raise ValueError(f"kernel weight undefined for size {size} with {m} features")
    return (m - 1) / (math.comb(m, size) * size * (m - size))


@dataclass
class KernelWeights:
    n_features: int
    weights: np.ndarray      # w(s) for s = 1..M-1, index s-1
    size_probs: np.ndarray   # p(s) for s = 1..M-1, index s-1

    @classmethod
    def for_features(cls, n_features: int) -> "KernelWeights":
        m = n_features
        if m < 2:
            raise ValueError("the Shapley kernel needs at least 2 features")
        sizes = np.arange(1, m)
        w = np.array([shapley_kernel_weight(m, int(s)) for s in sizes])
        p = (m - 1) / (sizes * (m - sizes))
        return cls(m, w, p / p.sum())


def sample_coalitions(kernel: KernelWeights, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` coalitions: size k with probability proportional to (M-1)/(k(M-k)), then a uniform k-subset."""
    m = kernel.n_features
    sizes = rng.choice(np.arange(1, m), size=n, p=kernel.size_probs)
    ranks = np.argsort(np.argsort(rng.random((n, m)), axis=1), axis=1)
    return (ranks < sizes[:, None]).astype(np.uint8)


def sample_coalition(kernel: KernelWeights, rng: np.random.Generator) -> int:
    return int(kernels.masks_to_bits(sample_coalitions(kernel, rng, 1))[0])


def second_moment_matrix(n_features: int) -> np.ndarray:
    """E[z z^T] for z drawn by ``sample_coalitions``, summed exactly over sizes."""
    m = n_features
    if m < 2:
        raise ValueError("second moment needs at least 2 features")
    kw = KernelWeights.for_features(m)
    k = np.arange(1, m, dtype=np.float64)
    diag = float(np.sum(kw.size_probs * k / m))
    off = float(np.sum(kw.size_probs * k * (k - 1) / (m * (m - 1))))
    A = np.full((m, m), off)
    np.fill_diagonal(A, diag)
    return A
