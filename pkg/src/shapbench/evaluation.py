"""Accuracy metrics against ground truth, the P score, faithfulness AUCs and timing."""

from __future__ import annotations

import math
import statistics
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from shapbench import kernels
from shapbench.game import CoalitionGame

# Explainers timed under this lock never overlap with other timed work.
TIMING_LOCK = threading.Lock()


def _pair(phi, gt) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(phi, dtype=np.float64).reshape(-1)
    b = np.asarray(gt, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def l1_distance(phi, gt) -> float:
    a, b = _pair(phi, gt)
    return float(np.sum(np.abs(a - b)))


def l2_distance(phi, gt) -> float:
    a, b = _pair(phi, gt)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def kendall_tau(phi, gt) -> float:
    """Tie-adjusted (tau-b) rank correlation. NaN when either vector is constant."""
    a, b = _pair(phi, gt)
    if a.shape[0] < 2:
        raise ValueError("kendall tau needs at least 2 features")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return math.nan
    return float(stats.kendalltau(a, b, variant="b").statistic)


METRICS: dict[str, Callable] = {"l1": l1_distance, "l2": l2_distance, "kendall": kendall_tau}
HIGHER_IS_BETTER = {"l1": False, "l2": False, "kendall": True}


@dataclass
class MetricResult:
    metric: str
    per_sample: list[float]
    mean: float = math.nan
    std: float = math.nan
    n_missing: int = 0

    def __post_init__(self):
        vals = np.asarray(self.per_sample, dtype=np.float64)
        ok = vals[np.isfinite(vals)]
        self.n_missing = int(vals.size - ok.size)
        self.mean = float(ok.mean()) if ok.size else math.nan
        self.std = float(ok.std()) if ok.size else math.nan


def evaluate_metric(metric: str, phis, gts) -> MetricResult:
    fn = METRICS[metric]
    return MetricResult(metric, [fn(p, g) for p, g in zip(phis, gts)])


def global_kendall(phis, gts) -> float:
    """Kendall tau between mean absolute attributions (global ranking mode)."""
    return kendall_tau(np.mean(np.abs(phis), axis=0), np.mean(np.abs(gts), axis=0))


@dataclass
class PerformanceScores:
    scores: list[float]
    degenerate: bool


def performance_p(distances) -> PerformanceScores:
    """P = 1 - (d - d_min) / (d_max - d_min); all ones when every distance is equal."""
    d = np.asarray(distances, dtype=np.float64)
    if d.size < 2:
        raise ValueError("P needs at least two explainers")
    if not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite")
    lo, hi = d.min(), d.max()
    if hi == lo:
        return PerformanceScores([1.0] * d.size, True)
    p = 1.0 - (d - lo) / (hi - lo)
    p[d == lo] = 1.0
    p[d == hi] = 0.0
    return PerformanceScores([float(v) for v in np.clip(p, 0.0, 1.0)], False)


def feature_order(phi) -> np.ndarray:
    """Indices by descending attribution; ties keep feature order."""
    return np.argsort(-np.asarray(phi, dtype=np.float64), kind="stable")


def _curve_masks(order: np.ndarray, include: bool) -> np.ndarray:
    m = order.shape[0]
    masks = np.zeros((m + 1, m), dtype=np.uint8) if include else np.ones((m + 1, m), dtype=np.uint8)
    for step, j in enumerate(order, start=1):
        masks[step:, j] = 1 if include else 0
    return masks


def _trapezoid(y: np.ndarray) -> float:
    m = y.shape[0] - 1
    return float(np.sum((y[1:] + y[:-1]) * 0.5) / m)


def inclusion_curve(game: CoalitionGame, phi) -> np.ndarray:
    """Target-class value as top-ranked features are unmasked, from v(0) to v(F)."""
    masks = _curve_masks(feature_order(phi), include=True)
    return game.values(kernels.masks_to_bits(masks))


def exclusion_curve(game: CoalitionGame, phi) -> np.ndarray:
    """Target-class value as top-ranked features are masked, from v(F) to v(0)."""
    masks = _curve_masks(feature_order(phi), include=False)
    return game.values(kernels.masks_to_bits(masks))


def inclusion_auc(game: CoalitionGame, phi) -> float:
    return _trapezoid(inclusion_curve(game, phi))


def exclusion_auc(game: CoalitionGame, phi) -> float:
    return _trapezoid(exclusion_curve(game, phi))


def curve_auc(curve) -> float:
    return _trapezoid(np.asarray(curve, dtype=np.float64))


@dataclass
class TimingRecord:
    explainer: str
    phase: str
    wall_seconds: float
    n_samples: int = 0
    n_features: int = 0
    repeats: int = 1
    raw: list[float] = field(default_factory=list)
    aggregation: str = "median"

    def __post_init__(self):
        if self.phase not in ("training", "inference"):
            raise ValueError(f"phase must be training or inference, got {self.phase!r}")
        if self.wall_seconds < 0 or self.repeats < 1:
            raise ValueError("invalid timing record")

    def to_dict(self) -> dict:
        return {
            "explainer": self.explainer,
            "phase": self.phase,
            "wall_seconds": self.wall_seconds,
            "n_samples": self.n_samples,
            "n_features": self.n_features,
            "repeats": self.repeats,
            "raw": list(self.raw),
            "aggregation": self.aggregation,
        }


def time_explainer(
    task: Callable[[], object],
    repeats: int = 1,
    phase: str = "inference",
    explainer: str = "",
    n_samples: int = 0,
    n_features: int = 0,
    warmup: bool = True,
) -> TimingRecord:
    """Median wall time of ``repeats`` calls after one untimed warm-up call.

    Runs under ``TIMING_LOCK``; BLAS threads are expected to be pinned to one
    by the caller (the CLI does this at start-up).
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    raw = []
    with TIMING_LOCK:
        if warmup:
            task()
        for _ in range(repeats):
            t0 = time.perf_counter()
            task()
            raw.append(time.perf_counter() - t0)
    return TimingRecord(explainer, phase, statistics.median(raw), n_samples, n_features, repeats, raw)
