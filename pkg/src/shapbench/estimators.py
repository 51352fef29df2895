"""Shapley value estimators sharing the ``Attribution`` result type.

Traditional estimators work on any ``Game``; expected gradients and FastSHAP
need a differentiable model / a model-backed game respectively.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from shapbench import kernels, numkit
from shapbench.game import (
    CoalitionGame,
    Game,
    KernelWeights,
    _check_enumerable,
    enumerate_coalitions,
    sample_coalitions,
    second_moment_matrix,
)
from shapbench.numkit import DenseNet, TrainingDiverged
from shapbench.rng import make_rng


class SingularSystemError(RuntimeError):
    pass


@dataclass
class Attribution:
    phi: np.ndarray
    explainer: str
    n_evaluations: int
    wall_time: float = 0.0
    seed: int | None = None
    per_class_phi: np.ndarray | None = None
    variance: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.phi)):
            raise FloatingPointError(f"{self.explainer} produced non-finite attributions")


def exact_shapley(game: Game) -> Attribution:
    """Weighted sum of marginal contributions over all 2^M coalitions."""
    t0 = time.perf_counter()
    m = game.n_features
    _check_enumerable(m)
    bits = enumerate_coalitions(m)
    values = game.values(bits)
    phi = kernels.exact_accumulate(values, m)
    return Attribution(phi, "exact", int(bits.shape[0]), time.perf_counter() - t0)


def monte_carlo_shapley(
    game: Game,
    n_permutations: int,
    rng: np.random.Generator,
    single_background: bool = True,
) -> Attribution:
    """Permutation sampling: walk a random feature order and credit each marginal gain.

    On a ``CoalitionGame`` each permutation is evaluated against one resampled
    background row (``single_background``); other games are queried directly, in
    which case every permutation telescopes to v(F) - v(empty) exactly.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be at least 1")
    t0 = time.perf_counter()
    m = game.n_features
    perms = np.argsort(rng.random((n_permutations, m)), axis=1).astype(np.int64)
    chains = kernels.chain_masks(perms)
    flat = chains.reshape(n_permutations * (m + 1), m)
    if isinstance(game, CoalitionGame) and single_background:
        rows = rng.integers(0, game.background.shape[0], size=n_permutations)
        chain_values = game.reference_values(flat, np.repeat(rows, m + 1))
    else:
        chain_values = game.values_masks(flat)
    chain_values = chain_values.reshape(n_permutations, m + 1)
    phi = kernels.chain_attribute(perms, chain_values) / n_permutations
    return Attribution(
        phi,
        "monte-carlo",
        n_permutations * (m + 1),
        time.perf_counter() - t0,
        meta={"n_permutations": n_permutations, "single_background": bool(single_background)},
    )


def constrained_wls(A: np.ndarray, b: np.ndarray, total: float) -> np.ndarray:
    """argmin of the quadratic with normal equations A phi = b subject to sum(phi) = total."""
    m = A.shape[0]
    ones = np.ones(m)
    sol = np.linalg.solve(A, np.column_stack([b, ones]))
    a_inv_b, a_inv_1 = sol[:, 0], sol[:, 1]
    return a_inv_b - a_inv_1 * (ones @ a_inv_b - total) / (ones @ a_inv_1)


def _paired_draws(kernel: KernelWeights, rng, n: int, paired: bool) -> np.ndarray:
    if not paired:
        return sample_coalitions(kernel, rng, n)
    half = sample_coalitions(kernel, rng, (n + 1) // 2)
    both = np.empty((2 * half.shape[0], kernel.n_features), dtype=np.uint8)
    both[0::2] = half
    both[1::2] = 1 - half
    return both[:n]


def kernelshap(
    game: Game,
    n_samples: int | None = None,
    rng: np.random.Generator | None = None,
    paired_sampling: bool = True,
    full_enumeration: bool = False,
    max_retries: int = 3,
) -> Attribution:
    """Kernel-weighted least squares with the efficiency constraint enforced exactly.

    With ``full_enumeration`` every proper coalition enters with its Shapley
    kernel weight and the solution equals the exact Shapley values. Otherwise
    coalitions are sampled from the normalised kernel and weighted equally.
    """
    t0 = time.perf_counter()
    m = game.n_features
    v0, v_full = game.values([0, game.full_bits])
    total = v_full - v0
    if m == 1:
        return Attribution([total], "kernelshap", 2, time.perf_counter() - t0)
    kw = KernelWeights.for_features(m)
    if full_enumeration:
        _check_enumerable(m)
        bits = np.arange(1, (1 << m) - 1, dtype=np.int64)
        Z = kernels.bits_to_masks(bits, m).astype(np.float64)
        w = kw.weights[kernels.popcount(bits) - 1]
        y = game.values(bits) - v0
        A = Z.T @ (Z * w[:, None])
        b = Z.T @ (w * y)
        phi = constrained_wls(A, b, total)
        return Attribution(
            phi, "kernelshap", 1 << m, time.perf_counter() - t0, meta={"full_enumeration": True}
        )
    if n_samples is None or n_samples < m + 2:
        raise ValueError(f"kernelshap needs at least M+2 = {m + 2} samples, got {n_samples}")
    if rng is None:
        raise ValueError("sampled kernelshap needs an rng")
    for attempt in range(max_retries + 1):
        masks = _paired_draws(kw, rng, n_samples, paired_sampling)
        Z = masks.astype(np.float64)
        A = Z.T @ Z / n_samples
        if np.linalg.matrix_rank(A) == m:
            break
    else:
        raise SingularSystemError(
            f"sampled regression system stayed singular after {max_retries} retries "
            f"(M={m}, n_samples={n_samples}); increase n_samples"
        )
    y = game.values_masks(masks) - v0
    b = Z.T @ y / n_samples
    phi = constrained_wls(A, b, total)
    return Attribution(
        phi,
        "kernelshap",
        n_samples + 2,
        time.perf_counter() - t0,
        meta={"paired_sampling": bool(paired_sampling), "retries": attempt},
    )


def unbiased_kernelshap(
    game: Game,
    n_samples: int,
    rng: np.random.Generator,
    paired_sampling: bool = False,
) -> Attribution:
    """Regression estimator with the exact second-moment matrix.

    phi = A^-1 (b - 1 (1'A^-1 b - (v(F) - v(0))) / (1'A^-1 1)) is linear in the
    sample mean b, so it is unbiased and its per-feature variance follows from
    the sample covariance of the summands.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    t0 = time.perf_counter()
    m = game.n_features
    if m < 2:
        raise ValueError("unbiased kernelshap needs at least 2 features")
    v0, v_full = game.values([0, game.full_bits])
    total = v_full - v0
    kw = KernelWeights.for_features(m)
    A = second_moment_matrix(m)
    masks = _paired_draws(kw, rng, n_samples, paired_sampling)
    y = game.values_masks(masks) - v0
    terms = masks * y[:, None]
    if paired_sampling:
        usable = (terms.shape[0] // 2) * 2
        summands = 0.5 * (terms[0:usable:2] + terms[1:usable:2])
        if usable < terms.shape[0]:
            summands = np.vstack([summands, terms[usable:]])
    else:
        summands = terms
    b = summands.mean(axis=0)
    ones = np.ones(m)
    A_inv = np.linalg.inv(A)
    a_inv_1 = A_inv @ ones
    denom = ones @ a_inv_1
    phi = A_inv @ (b - ones * (ones @ A_inv @ b - total) / denom)
    C = A_inv - np.outer(a_inv_1, a_inv_1) / denom
    n_eff = summands.shape[0]
    if n_eff > 1:
        cov_b = np.cov(summands, rowvar=False, ddof=1) / n_eff
        variance = np.clip(np.diag(C @ cov_b @ C.T), 0.0, None)
    else:
        variance = np.full(m, np.nan)
    return Attribution(
        phi,
        "unbiased-ks",
        n_samples + 2,
        time.perf_counter() - t0,
        variance=variance,
        meta={"paired_sampling": bool(paired_sampling)},
    )


def expected_gradients(
    model,
    x,
    background,
    n_samples: int,
    rng: np.random.Generator,
    target_class: int | None = None,
) -> Attribution:
    """Average of (x - b) * grad f(b + a(x - b)) over background rows b and a ~ U(0, 1).

    Background rows are drawn in whole shuffled passes (each row used
    floor(n/B) times, the remainder uniformly without replacement).
    """
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    background = np.array(background, dtype=np.float64, ndmin=2)
    nb = background.shape[0]
    if target_class is None:
        target_class = int(np.argmax(model.predict_proba(x[None, :])[0]))
    full, rest = divmod(n_samples, nb)
    idx = np.concatenate([np.tile(np.arange(nb), full), rng.choice(nb, size=rest, replace=False)])
    idx = rng.permutation(idx)
    base = background[idx]
    alpha = rng.random(n_samples)[:, None]
    points = base + alpha * (x[None, :] - base)
    grads = model.input_gradient(points, target_class)
    phi = np.mean((x[None, :] - base) * grads, axis=0)
    return Attribution(
        phi, "expected-grad", n_samples, time.perf_counter() - t0, meta={"target_class": target_class}
    )


@dataclass
class FastShapConfig:
    samples_per_instance: int = 32
    pool_size: int = 128
    batch_size: int = 32
    epochs: int = 200
    lr: float = 1e-3
    patience: int = 20
    holdout_fraction: float = 0.1
    hidden: tuple[int, ...] = (64, 64)
    seed: int = 0


@dataclass(eq=False)
class FastShapExplainer:
    net: DenseNet
    n_features: int
    n_classes: int
    model: object
    background: np.ndarray
    config: FastShapConfig
    normalize: bool = True
    meta: dict = field(default_factory=dict)

    def raw(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=np.float64, ndmin=2)
        return numkit.predict(self.net, X).reshape(X.shape[0], self.n_features, self.n_classes)


def additive_efficient_normalize(phi: np.ndarray, total) -> np.ndarray:
    """Shift every feature by the same amount so attributions sum to ``total``.

    ``phi`` is (..., M, K) with ``total`` (..., K), or (M,) with a scalar.
    """
    phi = np.asarray(phi, dtype=np.float64)
    m = phi.shape[-2] if phi.ndim >= 2 else phi.shape[0]
    if phi.ndim == 1:
        return phi + (total - phi.sum()) / m
    gap = np.asarray(total) - phi.sum(axis=-2)
    return phi + gap[..., None, :] / m


@dataclass
class _Pool:
    masks: np.ndarray     # (n_inst, pool, M) uint8
    targets: np.ndarray   # (n_inst, pool, K) v(S) - v(0)
    totals: np.ndarray    # (n_inst, K) v(F) - v(0)


def _build_pool(X, game_factory, kw: KernelWeights, pool_size: int, rng) -> _Pool:
    n, m = X.shape
    masks = np.empty((n, pool_size, m), dtype=np.uint8)
    targets, totals = [], []
    for i in range(n):
        game = game_factory(X[i])
        masks[i] = _paired_draws(kw, rng, pool_size, paired=True)
        bits = kernels.masks_to_bits(masks[i])
        vals = game.values_all(np.concatenate([[0, game.full_bits], bits]))
        targets.append(vals[2:] - vals[0])
        totals.append(vals[1] - vals[0])
    return _Pool(masks, np.stack(targets), np.stack(totals))


def _explanation_loss_and_grad(net, X, masks, targets, totals, normalize=True):
    """Mean squared coalition error and its gradient w.r.t. the raw net output."""
    b, s, m = masks.shape
    k = targets.shape[-1]
    out, cache = numkit.forward(net, X, "infer")
    raw = out.reshape(b, m, k)
    phi = additive_efficient_normalize(raw, totals) if normalize else raw
    Z = masks.astype(np.float64)
    pred = np.einsum("bsm,bmk->bsk", Z, phi)
    resid = pred - targets
    loss = float(np.sum(resid**2) / (b * s))
    d_pred = 2.0 * resid / (b * s)
    d_phi = np.einsum("bsm,bsk->bmk", Z, d_pred)
    if normalize:
        d_phi = d_phi - d_phi.mean(axis=1, keepdims=True)
    return loss, cache, d_phi.reshape(b, m * k)


def fastshap_train(
    model,
    train_X: np.ndarray,
    background: np.ndarray,
    config: FastShapConfig | None = None,
    game_factory: Callable[[np.ndarray], CoalitionGame] | None = None,
) -> FastShapExplainer:
    """Fit an explainer network so that z . phi(x) regresses onto v_x(z) - v_x(0).

    Coalitions come from the Shapley kernel. Each instance gets a pool of
    ``pool_size`` kernel-sampled coalitions whose values are computed once;
    every step draws ``samples_per_instance`` of them. A held-out slice of
    ``train_X`` drives early stopping.
    """
    config = config or FastShapConfig()
    if config.epochs < 0 or config.batch_size < 1 or config.lr <= 0 or config.samples_per_instance < 1:
        raise ValueError(f"invalid FastSHAP config {config}")
    t0 = time.perf_counter()
    X = np.array(train_X, dtype=np.float64, ndmin=2)
    background = np.array(background, dtype=np.float64, ndmin=2)
    n, m = X.shape
    k = model.n_classes
    if game_factory is None:
        def game_factory(x):
            return CoalitionGame(model, x, background, target_class=0)
    rng = make_rng(config.seed, "fastshap")
    kw = KernelWeights.for_features(m)
    rows_before = getattr(model, "rows_evaluated", 0)
    pool = _build_pool(X, game_factory, kw, config.pool_size, rng)
    n_hold = int(round(n * config.holdout_fraction)) if n > 1 else 0
    order = rng.permutation(n)
    hold, fit = order[:n_hold], order[n_hold:]
    if fit.size == 0:
        fit, hold = order, order[:0]
    net = numkit.dense_net([m, *config.hidden, m * k], "relu", "identity", 0.0, rng=rng)
    opt = numkit.Adam(net, lr=config.lr)

    def holdout_loss(candidate) -> float:
        idx = hold if hold.size else fit
        loss, _, _ = _explanation_loss_and_grad(
            candidate, X[idx], pool.masks[idx], pool.targets[idx], pool.totals[idx]
        )
        return loss

    best_loss = initial_loss = holdout_loss(net)
    best_net, best_epoch, stale, epochs_run = net.copy(), 0, 0, 0
    history = []
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(fit)
        for start in range(0, perm.size, config.batch_size):
            idx = perm[start:start + config.batch_size]
            pick = rng.integers(0, config.pool_size, size=(idx.size, config.samples_per_instance))
            masks = pool.masks[idx[:, None], pick]
            targets = pool.targets[idx[:, None], pick]
            loss, cache, d_raw = _explanation_loss_and_grad(net, X[idx], masks, targets, pool.totals[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite explanation loss at epoch {epoch}")
            opt.step(net, numkit.backward(net, cache, d_raw))
        epochs_run = epoch
        current = holdout_loss(net)
        history.append(current)
        if current < best_loss:
            best_loss, best_net, best_epoch, stale = current, net.copy(), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    meta = {
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "initial_holdout_loss": initial_loss,
        "best_holdout_loss": best_loss,
        "training_rows_evaluated": getattr(model, "rows_evaluated", 0) - rows_before,
        "training_time": time.perf_counter() - t0,
    }
    return FastShapExplainer(best_net, m, k, model, background, config, True, meta)


def fastshap_explain(
    explainer: FastShapExplainer,
    x: np.ndarray,
    game: CoalitionGame | None = None,
    target_class: int | None = None,
) -> Attribution:
    """One forward pass of the explainer plus v(F), v(0) for the normalization."""
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != explainer.n_features:
        raise numkit.ShapeError(
            f"instance has {x.shape[0]} features but the explainer expects {explainer.n_features}"
        )
    if game is None:
        game = CoalitionGame(explainer.model, x, explainer.background, target_class)
    vals = game.values_all([0, game.full_bits])
    totals = vals[1] - vals[0]
    raw = explainer.raw(x)[0]
    per_class = additive_efficient_normalize(raw, totals) if explainer.normalize else raw
    cls = game.target_class if target_class is None else target_class
    return Attribution(
        per_class[:, cls],
        "fastshap",
        2,
        time.perf_counter() - t0,
        per_class_phi=per_class,
        meta={"target_class": int(cls)},
    )


ATTRIBUTION_COLUMNS = ["sample_id", "feature", "phi", "explainer", "seed", "wall_time_s", "n_evaluations"]


def write_attributions_csv(path: str | Path, rows: list[tuple[int, Attribution]],
                           feature_names: list[str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ATTRIBUTION_COLUMNS)
        for sample_id, att in rows:
            for name, value in zip(feature_names, att.phi):
                writer.writerow([
                    sample_id, name, format(value, ".17g"), att.explainer,
                    "" if att.seed is None else att.seed, format(att.wall_time, ".6g"), att.n_evaluations,
                ])


def read_attributions_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["sample_id"] = int(r["sample_id"])
        r["phi"] = float(r["phi"])
        r["n_evaluations"] = int(r["n_evaluations"])
    return rows
