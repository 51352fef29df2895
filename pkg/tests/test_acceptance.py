"""Acceptance suite: ten criteria at their stated tolerances.

Run under pytest (one test per criterion, a PASS/FAIL line each in the
terminal summary) or directly::

    python3 tests/test_acceptance.py
"""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from shapbench import bench, numkit
from shapbench import estimators as est
from shapbench import evaluation as ev
from shapbench.blackbox import Model, TrainConfig, linear_model, load_model, save_model, train_default_mlp
from shapbench.data import SyntheticSpec, make_synthetic, split
from shapbench.game import CoalitionGame, FunctionGame, TableGame
from shapbench.numkit import DenseNet, Layer
from shapbench.rng import make_rng

RESULTS: dict[int, tuple[bool, str]] = {}
MONKS_ARGS = [
    "run", "--explainers", "exact,kernelshap,unbiased-ks,monte-carlo,fastshap,expected-grad",
    "--datasets", "monks", "--metrics", "l1,l2,kendall", "--ground-truth", "exact",
    "--num-samples", "100", "--seed", "7",
]


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (ok, detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


# -- 1. axioms -----------------------------------------------------------------

def _symmetrize(table: np.ndarray, m: int, a: int, b: int, dummy: int | None) -> np.ndarray:
    """Force features a, b to be interchangeable and ``dummy`` (if any) to be null."""
    out = table.copy()
    if dummy is not None:
        for s in range(1 << m):
            out[s] = table[s & ~(1 << dummy)]
    t = out.copy()
    for s in range(1 << m):
        if ((s >> a) & 1) != ((s >> b) & 1):
            t[s] = 0.5 * (out[s] + out[s ^ (1 << a) ^ (1 << b)])
    return t


def _symmetric_model_game(rng, m):
    a, b, dummy = rng.choice(m, size=3, replace=False) if m >= 3 else (0, 1, None)
    k = 2
    W1 = rng.normal(size=(m, 8))
    W1[b] = W1[a]
    if dummy is not None:
        W1[dummy] = 0.0
    net = DenseNet([Layer(W1, rng.normal(scale=0.1, size=8), "relu"),
                    Layer(rng.normal(size=(8, k)), rng.normal(scale=0.1, size=k), "softmax")])
    x = rng.normal(size=m)
    bg = rng.normal(size=(6, m))
    x[b], bg[:, b] = x[a], bg[:, a]
    return CoalitionGame(Model.from_net(net), x, bg), int(a), int(b), dummy


def check_1() -> tuple[bool, str]:
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = {"efficiency": 0.0, "symmetry": 0.0, "dummy": 0.0}
    for i in range(200):
        m = int(rng.integers(2, 11))
        if i % 2 == 0:
            a, b = (int(v) for v in rng.choice(m, size=2, replace=False))
            rest = [j for j in range(m) if j not in (a, b)]
            dummy = int(rng.choice(rest)) if rest else None
            table = _symmetrize(rng.normal(size=1 << m), m, a, b, dummy)
            game = TableGame(table)
        else:
            game, a, b, dummy = _symmetric_model_game(rng, m)
        phi = est.exact_shapley(game).phi
        worst["efficiency"] = max(worst["efficiency"], abs(phi.sum() - (game.grand() - game.empty())))
        worst["symmetry"] = max(worst["symmetry"], abs(phi[a] - phi[b]))
        if dummy is not None:
            worst["dummy"] = max(worst["dummy"], abs(phi[dummy]))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-9 and elapsed < 60
    return ok, f"200 games, worst {', '.join(f'{k} {v:.1e}' for k, v in worst.items())}, {elapsed:.1f}s"


# -- 2. full kernelshap = exact ------------------------------------------------

def check_2() -> tuple[bool, str]:
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(50):
        m = int(rng.integers(2, 11))
        if i % 2 == 0:
            game = TableGame(rng.normal(size=1 << m))
        else:
            game, *_ = _symmetric_model_game(rng, m)
        diff = est.kernelshap(game, full_enumeration=True).phi - est.exact_shapley(game).phi
        worst = max(worst, float(np.max(np.abs(diff))))
    elapsed = time.perf_counter() - t0
    return worst <= 1e-6 and elapsed < 60, f"50 games, max Linf {worst:.1e}, {elapsed:.1f}s"


# -- 3. convergence ------------------------------------------------------------

def check_3() -> tuple[bool, str]:
    t0 = time.perf_counter()
    game = TableGame([0.0, 1.0, 2.0, 4.0])
    exact = est.exact_shapley(game).phi
    budgets = [2**8, 2**10, 2**12, 2**14]
    runners = {
        "unbiased-ks": lambda n, r: est.unbiased_kernelshap(game, n, r),
        "monte-carlo": lambda n, r: est.monte_carlo_shapley(game, n, r),
    }
    ok, parts = True, []
    for name, fn in runners.items():
        maes = [
            float(np.mean([np.mean(np.abs(fn(n, make_rng(s, "convergence", name, n)).phi - exact))
                           for s in range(3)]))
            for n in budgets
        ]
        decreasing = all(b < a for a, b in zip(maes, maes[1:]))
        good = decreasing and maes[-1] < 0.01
        ok &= good
        parts.append(f"{name} MAE {' > '.join(f'{v:.4f}' for v in maes)}"
                     + ("" if decreasing else " (not decreasing)")
                     + ("" if maes[-1] < 0.01 else " (final >= 0.01)"))
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    return ok, "; ".join(parts) + f", {elapsed:.1f}s"


# -- 4. linear oracle ----------------------------------------------------------

def check_4() -> tuple[bool, str]:
    t0 = time.perf_counter()
    worst = {"exact": 0.0, "kernelshap": 0.0, "expected-grad": 0.0}
    for m in (2, 4, 8):
        ds, w = make_synthetic(SyntheticSpec(m, 400, "linear", seed=m))
        model = linear_model(w)
        bg = ds.X[:100]
        for i, x in enumerate(ds.X[200:205]):
            oracle = w * (x - bg.mean(axis=0))
            game = CoalitionGame(model, x, bg, target_class=0)
            got = {
                "exact": est.exact_shapley(game).phi,
                "kernelshap": est.kernelshap(game, full_enumeration=True).phi,
                "expected-grad": est.expected_gradients(model, x, bg, 10_000, make_rng(m, "eg", i), 0).phi,
            }
            for k, phi in got.items():
                worst[k] = max(worst[k], float(np.max(np.abs(phi - oracle))))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 0.02 and elapsed < 120
    return ok, f"M in 2,4,8, worst {', '.join(f'{k} {v:.1e}' for k, v in worst.items())}, {elapsed:.1f}s"


# -- 5. gradients --------------------------------------------------------------

def _fastshap_loss_fd(rng) -> float:
    m, k, b, s = 4, 2, 3, 5
    net = numkit.dense_net([m, 16, 16, m * k], "relu", "identity", 0.0, rng=rng)
    X = rng.normal(size=(b, m))
    masks = (rng.random((b, s, m)) < 0.5).astype(np.uint8)
    targets = rng.normal(size=(b, s, k))
    totals = rng.normal(size=(b, k))
    loss, cache, d_raw = est._explanation_loss_and_grad(net, X, masks, targets, totals)
    grads = numkit.backward(net, cache, d_raw)
    eps, errs = 1e-5, []
    for layer, gw in zip(net.layers, grads.weights):
        num = np.zeros_like(layer.weight)
        for idx in np.ndindex(layer.weight.shape):
            orig = layer.weight[idx]
            layer.weight[idx] = orig + eps
            up = est._explanation_loss_and_grad(net, X, masks, targets, totals)[0]
            layer.weight[idx] = orig - eps
            down = est._explanation_loss_and_grad(net, X, masks, targets, totals)[0]
            layer.weight[idx] = orig
            num[idx] = (up - down) / (2 * eps)
        errs.append(numkit.relative_error(gw, num))
    return max(errs)


def check_5() -> tuple[bool, str]:
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    worst = {"black-box": 0.0, "black-box input": 0.0, "fastshap net": 0.0, "fastshap loss": 0.0}
    for probe in range(100):
        m = int(rng.integers(2, 9))
        if probe % 2 == 0:
            net = numkit.dense_net([m, 64, 64, 2], "relu", "softmax", 0.0, rng=rng)
            for layer in net.layers:
                layer.bias[:] = rng.normal(scale=0.1, size=layer.bias.shape)
            x = rng.normal(size=(2, m))
            worst["black-box"] = max(worst["black-box"], numkit.grad_check(net, x, rng=rng).max_error)
            model = Model.from_net(net)
            xi = x[0]
            g = model.input_gradient(xi, 1)
            num = np.array([(model.predict_proba(xi + 1e-5 * e)[0, 1] - model.predict_proba(xi - 1e-5 * e)[0, 1]) / 2e-5
                            for e in np.eye(m)])
            worst["black-box input"] = max(worst["black-box input"], numkit.relative_error(g, num))
        else:
            net = numkit.dense_net([m, 64, 64, m * 2], "relu", "identity", 0.0, rng=rng)
            worst["fastshap net"] = max(worst["fastshap net"],
                                        numkit.grad_check(net, rng.normal(size=(2, m)), rng=rng).max_error)
            if probe % 10 == 1:
                worst["fastshap loss"] = max(worst["fastshap loss"], _fastshap_loss_fd(rng))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-4 and elapsed < 60
    return ok, f"100 probes, worst {', '.join(f'{k} {v:.1e}' for k, v in worst.items())}, {elapsed:.1f}s"


# -- 6. FastSHAP learning signal ---------------------------------------------

def check_6() -> tuple[bool, str]:
    t0 = time.perf_counter()
    ds, _ = make_synthetic(SyntheticSpec(6, 1000, "linear", seed=0))
    sp = split(ds, 0.2, 0)
    model = train_default_mlp(sp, TrainConfig(seed=0))
    bg = bench.choose_background(sp.train.X, 100, 0, ds.name)
    X = sp.val.X[:50]
    gt = np.array([est.exact_shapley(CoalitionGame(model, x, bg)).phi for x in X])

    def score(expl):
        before = model.rows_evaluated
        phi = np.array([est.fastshap_explain(expl, x, CoalitionGame(model, x, bg)).phi for x in X])
        rows = model.rows_evaluated - before
        return ev.evaluate_metric("l2", phi, gt).mean, ev.evaluate_metric("kendall", phi, gt).mean, rows

    init = est.fastshap_train(model, sp.train.X, bg, est.FastShapConfig(epochs=0, seed=0))
    trained = est.fastshap_train(model, sp.train.X, bg, est.FastShapConfig(seed=0))
    l2_init, _, _ = score(init)
    l2, tau, fs_rows = score(trained)
    # accounting: fastshap inference cost does not depend on the per-sample estimators' budgets
    ks_rows = []
    for budget in (64, 512):
        before = model.rows_evaluated
        for i, x in enumerate(X):
            est.kernelshap(CoalitionGame(model, x, bg), budget, make_rng(0, "ks", budget, i))
        ks_rows.append(model.rows_evaluated - before)
    flat = fs_rows == len(X) * (2 * bg.shape[0] + 1) and ks_rows[1] > ks_rows[0]
    ratio = l2_init / l2
    elapsed = time.perf_counter() - t0
    ok = ratio >= 5 and tau >= 0.8 and flat and elapsed < 600
    return ok, (f"L2 {l2_init:.3f} -> {l2:.4f} ({ratio:.1f}x), Kendall {tau:.3f}, "
                f"fastshap rows {fs_rows} vs kernelshap {ks_rows[0]}/{ks_rows[1]} at budgets 64/512, {elapsed:.1f}s")


# -- 7. P endpoints ------------------------------------------------------------

def check_7() -> tuple[bool, str]:
    rng = np.random.default_rng(707)
    bad = 0
    for i in range(1000):
        n = int(rng.integers(2, 12))
        d = rng.exponential(size=n) * 10 ** rng.uniform(-3, 3)
        if i % 5 == 0:
            d[rng.integers(n)] = d.min()  # ties at the minimum
        if d.max() == d.min():
            continue
        p = np.array(ev.performance_p(d).scores)
        fine = (np.all(p[d == d.min()] == 1.0) and np.all(p[d == d.max()] == 0.0)
                and np.all((p >= 0) & (p <= 1)))
        bad += not fine
    return bad == 0, f"1000 random vectors, {bad} violations"


# -- 8. AUC sanity -------------------------------------------------------------

def check_8() -> tuple[bool, str]:
    m = 6
    counting = FunctionGame(lambda masks: masks.sum(axis=1) / m, m)
    rng = np.random.default_rng(808)
    auc_err = max(abs(ev.inclusion_auc(counting, rng.normal(size=m)) - 0.5) for _ in range(20))
    w = np.array([4.0, 1.0, 0.5, 0.25, 0.1, 0.05])
    model = linear_model(w)
    bg = rng.normal(size=(20, m))
    x = bg.mean(axis=0) + 1.0
    dominant = CoalitionGame(model, x, bg, target_class=0)
    phi = est.exact_shapley(dominant).phi
    inc, inc_rev = ev.inclusion_auc(dominant, phi), ev.inclusion_auc(dominant, -phi)
    ends_ok = True
    for _ in range(10):
        game, *_ = _symmetric_model_game(rng, 5)
        p = rng.normal(size=5)
        ic, xc = ev.inclusion_curve(game, p), ev.exclusion_curve(game, p)
        ends_ok &= ic[0] == game.empty() and ic[-1] == game.grand()
        ends_ok &= xc[0] == game.grand() and xc[-1] == game.empty()
    ok = auc_err <= 1e-9 and inc >= inc_rev and ends_ok
    return ok, f"counting AUC err {auc_err:.1e}, dominant inclusion {inc:.3f} vs reversed {inc_rev:.3f}, endpoints exact {ends_ok}"


# -- 9 / 10. Monks end to end and determinism --------------------------------

def _cli(args: list[str]) -> tuple[int, str, float]:
    env = {**os.environ, "PYTHONHASHSEED": "0"}
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "shapbench.cli", *args], capture_output=True, text=True, env=env)
    return proc.returncode, proc.stdout + proc.stderr, time.perf_counter() - t0


_MONKS: dict = {}


def monks_runs() -> dict:
    """Two same-seed runs: one with a fresh cache, one with no cache at all."""
    if not _MONKS:
        root = Path(tempfile.mkdtemp(prefix="shapbench-acceptance-"))
        a = _cli([*MONKS_ARGS, "--out", str(root / "a"), "--cache-dir", str(root / "cache")])
        b = _cli([*MONKS_ARGS, "--out", str(root / "b"), "--no-cache"])
        _MONKS.update(root=root, a=a, b=b)
    return _MONKS


def check_9() -> tuple[bool, str]:
    runs = monks_runs()
    root = runs["root"]
    (rc_a, out_a, t_a), (rc_b, _, t_b) = runs["a"], runs["b"]
    plots = root / "a" / "plots"
    wanted = {
        "report.json": (root / "a" / "report.json").exists(),
        "table": "P(l2)" in out_a and all(n in out_a for n in bench.EXPLAINERS),
        "bar plot": (plots / "bar_monks_global.svg").exists(),
        "quadrant plot": (plots / "quadrant_monks_l2.svg").exists(),
        "samples sweep": (plots / "time_vs_samples_monks.svg").exists(),
        "features sweep": (plots / "time_vs_features_synthetic.svg").exists(),
    }
    h_a = (root / "a" / "report.sha256").read_text().strip() if wanted["report.json"] else ""
    h_b = (root / "b" / "report.sha256").read_text().strip() if (root / "b" / "report.sha256").exists() else "missing"
    missing = [k for k, v in wanted.items() if not v]
    ok = rc_a == 0 and rc_b == 0 and not missing and h_a == h_b and max(t_a, t_b) < 900
    detail = f"exit {rc_a}/{rc_b}, {t_a:.0f}s/{t_b:.0f}s, hash {'equal' if h_a == h_b else 'DIFFERENT'} {h_a[:12]}"
    if missing:
        detail += f", missing {missing}"
    return ok, detail


def check_10() -> tuple[bool, str]:
    runs = monks_runs()
    a, b = runs["root"] / "a", runs["root"] / "b"
    files = ["report.json", "models/monks.json"] + [f"plots/{p.name}" for p in sorted((a / "plots").glob("*.svg"))]
    differ = [f for f in files if not (b / f).exists() or (a / f).read_bytes() != (b / f).read_bytes()]
    model = load_model(a / "models" / "monks.json")
    resaved = runs["root"] / "resaved.json"
    save_model(model, resaved)
    again = load_model(resaved)
    probe = np.random.default_rng(0).normal(size=(50, model.input_dim))
    exact_params = all(p.tobytes() == q.tobytes() for p, q in zip(model.net.params(), again.net.params()))
    round_trip = (resaved.read_bytes() == (a / "models" / "monks.json").read_bytes()
                  and exact_params
                  and model.predict_proba(probe).tobytes() == again.predict_proba(probe).tobytes())
    ok = not differ and round_trip
    return ok, f"{len(files)} files compared, {len(differ)} differ {differ[:3]}, model round-trip exact {round_trip}"


CHECKS = {n: globals()[f"check_{n}"] for n in range(1, 11)}


@pytest.mark.parametrize("n", list(CHECKS))
def test_criterion(n):
    ok, detail = CHECKS[n]()
    record(n, ok, detail)
    assert ok, detail


def main() -> int:
    for n, fn in CHECKS.items():
        ok, detail = fn()
        record(n, ok, detail)
    return 0 if all(ok for ok, _ in RESULTS.values()) else 1


if __name__ == "__main__":
    raise SystemExit(main())
