import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from shapbench import estimators as est
from shapbench import evaluation as ev
from shapbench.game import FunctionGame


def brute_tau_a(a, b):
    s = 0
    pairs = list(itertools.combinations(range(len(a)), 2))
    for i, j in pairs:
        s += np.sign(a[i] - a[j]) * np.sign(b[i] - b[j])
    return s / len(pairs)


def test_distances():
    gt = np.array([1.0, -2.0])
    assert ev.l1_distance(gt, gt) == 0 and ev.l2_distance(gt, gt) == 0
    assert ev.l2_distance(gt + [3, 4], gt) == 5.0
    assert ev.l1_distance(gt + [3, 4], gt) == 7.0
    with pytest.raises(ValueError):
        ev.l1_distance([1, 2], [1, 2, 3])


def test_batch_aggregate_is_mean():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(10, 4)), rng.normal(size=(10, 4))
    res = ev.evaluate_metric("l2", a, b)
    assert res.mean == pytest.approx(np.mean([ev.l2_distance(x, y) for x, y in zip(a, b)]))


def test_kendall_cases():
    assert ev.kendall_tau([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert ev.kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert ev.kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3)
    assert math.isnan(ev.kendall_tau([1, 1, 1], [1, 2, 3]))


def test_kendall_missing_counted():
    res = ev.evaluate_metric("kendall", [[1, 1, 1], [1, 2, 3]], [[1, 2, 3], [1, 2, 3]])
    assert res.n_missing == 1 and res.mean == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=8, unique=True), st.randoms())
def test_kendall_matches_brute_force_and_antisymmetric(values, r):
    a = np.array(values)
    b = np.array(r.sample(values, len(values)))
    assert ev.kendall_tau(a, b) == pytest.approx(brute_tau_a(a, b), abs=1e-12)
    assert ev.kendall_tau(-a, b) == pytest.approx(-ev.kendall_tau(a, b), abs=1e-12)


def test_p_examples():
    assert ev.performance_p([0.1, 0.3, 0.5]).scores == pytest.approx([1.0, 0.5, 0.0])
    assert ev.performance_p([2, 7]).scores == [1.0, 0.0]
    res = ev.performance_p([0.4, 0.4, 0.4])
    assert res.degenerate and res.scores == [1.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        ev.performance_p([1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=2, max_size=10), st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_p_affine_invariant_argmax(d, scale, shift):
    d = np.array(d)
    t = scale * d + shift
    # rounding in the affine map can merge distinct values (e.g. 5e-324 + 1 == 1)
    assume(d.max() != d.min() and np.unique(t).size == np.unique(d).size)
    a = ev.performance_p(d).scores
    b = ev.performance_p(t).scores
    assert np.argmax(a) == np.argmax(b)


def counting_game(m):
    return FunctionGame(lambda masks: masks.sum(axis=1) / m, m)


def test_counting_model_inclusion_auc_half():
    g = counting_game(5)
    for phi in (np.arange(5.0), -np.arange(5.0), np.zeros(5)):
        np.testing.assert_allclose(ev.inclusion_curve(g, phi), np.linspace(0, 1, 6), atol=1e-15)
        assert ev.inclusion_auc(g, phi) == pytest.approx(0.5, abs=1e-9)


def test_dominant_feature_ordering():
    w = np.array([5.0, 0.5, 0.2, 0.1])
    g = FunctionGame(lambda masks: masks @ w, 4)
    phi = est.exact_shapley(g).phi
    assert ev.inclusion_auc(g, phi) >= ev.inclusion_auc(g, -phi)
    assert ev.exclusion_auc(g, phi) <= ev.exclusion_auc(g, -phi)


def test_curve_endpoints():
    rng = np.random.default_rng(0)
    table = rng.normal(size=16)
    from shapbench.game import TableGame

    g = TableGame(table)
    phi = rng.normal(size=4)
    inc, exc = ev.inclusion_curve(g, phi), ev.exclusion_curve(g, phi)
    assert inc[0] == g.empty() and inc[-1] == g.grand()
    assert exc[0] == g.grand() and exc[-1] == g.empty()


def test_time_explainer_records_raw_values():
    rec = ev.time_explainer(lambda: sum(range(1000)), repeats=5, explainer="x")
    assert len(rec.raw) == 5 and rec.wall_seconds == pytest.approx(np.median(rec.raw))
    assert rec.wall_seconds > 0 and rec.phase == "inference"
    with pytest.raises(ValueError):
        ev.time_explainer(lambda: None, repeats=0)
    with pytest.raises(ValueError):
        ev.TimingRecord("x", "warmup", 1.0)


def test_exact_cost_grows_with_m():
    res = {}
    for m in (6, 10):
        g = counting_game(m)
        att = est.exact_shapley(g)
        rec = ev.time_explainer(lambda: est.exact_shapley(counting_game(m)), repeats=3)
        res[m] = (att.n_evaluations, rec.wall_seconds)
    assert res[6][0] == 64 and res[10][0] == 1024
    assert res[6][1] > 0 and res[10][1] > 0
