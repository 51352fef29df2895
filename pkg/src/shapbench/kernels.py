"""Backend selection for the coalition kernels.

The compiled extension is preferred. Set ``SHAPBENCH_PURE_PYTHON=1`` to force
the numpy fallback (the test suite checks both agree).
"""

from __future__ import annotations

import os

from shapbench import _pykernels

BACKEND: str

if os.environ.get("SHAPBENCH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from shapbench import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

popcount = _impl.popcount
bits_to_masks = _impl.bits_to_masks
masks_to_bits = _impl.masks_to_bits
exact_accumulate = _impl.exact_accumulate
impute = _impl.impute
impute_rows = _impl.impute_rows
chain_masks = _impl.chain_masks
chain_attribute = _impl.chain_attribute
shapley_weights = _pykernels.shapley_weights

__all__ = [
    "BACKEND",
    "popcount",
    "bits_to_masks",
    "masks_to_bits",
    "exact_accumulate",
    "impute",
    "impute_rows",
    "chain_masks",
    "chain_attribute",
    "shapley_weights",
]
