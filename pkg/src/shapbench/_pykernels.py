"""Pure numpy implementations of the coalition kernels.

Used when the compiled ``_ckernels`` extension is unavailable, or when
``SHAPBENCH_PURE_PYTHON=1`` is set. Signatures and results match the
compiled versions exactly (up to summation order in ``exact_accumulate``).
"""

from __future__ import annotations

import math

import numpy as np


def popcount(bits: np.ndarray) -> np.ndarray:
    bits = np.ascontiguousarray(bits, dtype=np.int64)
    out = np.zeros(bits.shape, dtype=np.int64)
    work = bits.copy()
    while np.any(work):
        out += work & 1
        work >>= 1
    return out


def bits_to_masks(bits: np.ndarray, n_features: int) -> np.ndarray:
    bits = np.ascontiguousarray(bits, dtype=np.int64)
    shifts = np.arange(n_features, dtype=np.int64)
    return ((bits[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def masks_to_bits(masks: np.ndarray) -> np.ndarray:
    masks = np.ascontiguousarray(masks, dtype=np.uint8)
    n_features = masks.shape[1]
    weights = np.left_shift(np.int64(1), np.arange(n_features, dtype=np.int64))
    return (masks.astype(np.int64) * weights[None, :]).sum(axis=1)


def shapley_weights(n_features: int) -> np.ndarray:
    """Permutation weight |S|!(M-|S|-1)!/M! for each coalition size 0..M-1."""
    m = n_features
    return np.array(
        [math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m) for s in range(m)],
        dtype=np.float64,
    )


def exact_accumulate(values: np.ndarray, n_features: int) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    m = n_features
    if values.shape[0] != 1 << m:
        raise ValueError(f"value table has {values.shape[0]} entries, expected {1 << m}")
    weights = shapley_weights(m)
    all_bits = np.arange(1 << m, dtype=np.int64)
    sizes = popcount(all_bits)
    phi = np.zeros(m, dtype=np.float64)
    for i in range(m):
        bit = np.int64(1) << i
        without = all_bits[(all_bits & bit) == 0]
        gains = values[without | bit] - values[without]
        phi[i] = np.dot(weights[sizes[without]], gains)
    return phi


def impute(masks: np.ndarray, x: np.ndarray, background: np.ndarray) -> np.ndarray:
    masks = np.ascontiguousarray(masks, dtype=np.uint8).astype(bool)
    x = np.ascontiguousarray(x, dtype=np.float64)
    background = np.ascontiguousarray(background, dtype=np.float64)
    n, b = masks.shape[0], background.shape[0]
    out = np.where(masks[:, None, :], x[None, None, :], background[None, :, :])
    return out.reshape(n * b, x.shape[0])


def impute_rows(masks: np.ndarray, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Pair mask k with reference row k (one background row per coalition)."""
    masks = np.ascontiguousarray(masks, dtype=np.uint8).astype(bool)
    return np.where(masks, np.asarray(x, dtype=np.float64)[None, :], np.asarray(rows, dtype=np.float64))


def chain_masks(perms: np.ndarray) -> np.ndarray:
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    p, m = perms.shape
    out = np.zeros((p, m + 1, m), dtype=np.uint8)
    rows = np.arange(p)
    for step in range(m):
        out[:, step + 1, :] = out[:, step, :]
        out[rows, step + 1, perms[:, step]] = 1
    return out


def chain_attribute(perms: np.ndarray, chain_values: np.ndarray) -> np.ndarray:
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    chain_values = np.ascontiguousarray(chain_values, dtype=np.float64)
    p, m = perms.shape
    gains = np.diff(chain_values, axis=1)
    phi = np.zeros(m, dtype=np.float64)
    np.add.at(phi, perms.ravel(), gains.ravel())
    return phi
