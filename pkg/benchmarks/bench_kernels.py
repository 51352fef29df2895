#!/usr/bin/env python3
"""Compare the compiled coalition kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeats 5] [--json out.json]

Both backends are imported directly, so no environment switch is needed.
Each row reports the median wall time per call and the speed-up.
"""

from __future__ import annotations

import argparse
import json
import statistics
import time

import numpy as np

from shapbench import _pykernels

try:
    from shapbench import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _median_time(fn, repeats: int) -> float:
    fn()
    raw = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        raw.append(time.perf_counter() - t0)
    return statistics.median(raw)


def cases(rng: np.random.Generator):
    m_exact = 14
    values = rng.random(1 << m_exact)
    bits = np.arange(1 << 16, dtype=np.int64)
    masks = _pykernels.bits_to_masks(bits[:2048], 16)
    x = rng.standard_normal(16)
    background = rng.standard_normal((100, 16))
    perms = np.argsort(rng.random((512, 12)), axis=1).astype(np.int64)
    chain_vals = rng.random((512, 13))
    rows = rng.standard_normal((2048, 16))
    return {
        f"exact_accumulate M={m_exact}": lambda k: k.exact_accumulate(values, m_exact),
        "bits_to_masks 2^16 x 16": lambda k: k.bits_to_masks(bits, 16),
        "masks_to_bits 2048 x 16": lambda k: k.masks_to_bits(masks),
        "popcount 2^16": lambda k: k.popcount(bits),
        "impute 2048 coalitions x 100 bg": lambda k: k.impute(masks, x, background),
        "impute_rows 2048": lambda k: k.impute_rows(masks, x, rows),
        "chain_masks 512 x 12": lambda k: k.chain_masks(perms),
        "chain_attribute 512 x 12": lambda k: k.chain_attribute(perms, chain_vals),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return 1
    results = []
    print(f"{'kernel':36s} {'python s':>12s} {'cython s':>12s} {'speed-up':>9s}")
    for name, call in cases(np.random.default_rng(0)).items():
        py = _median_time(lambda: call(_pykernels), args.repeats)
        cy = _median_time(lambda: call(_ckernels), args.repeats)
        results.append({"kernel": name, "python_s": py, "cython_s": cy, "speedup": py / cy})
        print(f"{name:36s} {py:12.6f} {cy:12.6f} {py / cy:8.2f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
