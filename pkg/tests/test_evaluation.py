import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from statsmodels.stats.multitest import multipletests

from hvacopt.baselines import DecayModel, PersistenceModel
from hvacopt.data_model import OperationMode
from hvacopt.evaluation import (
    evaluate_models,
    friedman_statistic,
    friedman_test,
    hochberg_adjust,
    rmse,
    significance,
    split_by_mode,
    split_segments,
)
from hvacopt.thermal_oracle import RoomPhysics, generate_corpus

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_rmse_examples():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert rmse([1, 2, 3], [2, 3, 4]) == pytest.approx(1.0)
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(ValueError):
        rmse([1, 2], [1])
    with pytest.raises(ValueError):
        rmse([], [])


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30), st.floats(-50, 50, allow_nan=False))
def test_rmse_symmetry_and_scaling(pairs, c):
    a, f = map(np.array, zip(*pairs))
    assert rmse(a, f) == pytest.approx(rmse(f, a))
    assert rmse(c * a, c * f) == pytest.approx(abs(c) * rmse(a, f), rel=1e-9, abs=1e-9)


def test_split_sizes_and_determinism():
    items = list(range(10))
    tr, te = split_segments(items, 0.8, seed=3)
    assert len(tr) == 8 and len(te) == 2
    assert split_segments(items, 0.8, seed=3) == (tr, te)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            split_segments(items, bad)
    with pytest.raises(ValueError):
        split_segments(items[:4])


def test_table2_split_counts():
    tr, te = split_segments(list(range(68)), 0.8)
    assert (len(tr), len(te)) == (54, 14)
    tr, te = split_segments(list(range(112)), 0.8)
    assert (len(tr), len(te)) == (90, 22)


@given(st.integers(5, 200), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_is_a_partition(n, ratio, seed):
    tr, te = split_segments(list(range(n)), ratio, seed)
    assert sorted(tr + te) == list(range(n))
    assert not set(tr) & set(te)


def test_split_by_mode():
    segs = generate_corpus(10, 15, seed=0)
    train, test = split_by_mode(segs)
    assert len(train[OperationMode.PASSIVE_COOLING]) == 8 and len(test[OperationMode.ACTIVE_HEATING]) == 3


def _noiseless_test_set():
    return generate_corpus(8, 0, (10, 20), physics=RoomPhysics(noise_std=0.0), seed=5)


def test_oracle_decay_is_exact_and_beats_persistence():
    ph = RoomPhysics(noise_std=0.0)
    segs = _noiseless_test_set()
    rep = evaluate_models({"decay": DecayModel.passive_from_physics(ph), "persistence": PersistenceModel()}, segs)
    assert rep.pooled_rmse["decay"] < 1e-9
    assert rep.pooled_rmse["persistence"] > rep.pooled_rmse["decay"]
    assert rep.segment_rmse.shape == (len(segs), 2)
    assert rep.to_csv().splitlines()[0] == "model,rmse"


def test_horizon_crops_segments():
    segs = _noiseless_test_set()
    rep = evaluate_models({"p": PersistenceModel()}, segs, horizon=3)
    manual = np.concatenate([np.array(s.inside[1:4]) - s.inside[0] for s in segs])
    assert rep.pooled_rmse["p"] == pytest.approx(math.sqrt(np.mean(manual**2)))


class _Broken:
    def predict(self, start, path):
        raise RuntimeError("boom")


def test_model_failure_is_recorded_not_fatal():
    segs = _noiseless_test_set()[:3]
    rep = evaluate_models({"ok": PersistenceModel(), "bad": _Broken()}, segs)
    assert len(rep.failures) == 3 and all(name == "bad" for _, name, _ in rep.failures)
    assert np.isnan(rep.segment_rmse[:, 1]).all() and np.isfinite(rep.segment_rmse[:, 0]).all()
    assert math.isnan(rep.pooled_rmse["bad"])


def test_per_mode_model_dicts():
    segs = generate_corpus(5, 5, seed=1)
    models = {"p": {OperationMode.PASSIVE_COOLING: PersistenceModel(), OperationMode.ACTIVE_HEATING: PersistenceModel()}}
    assert not evaluate_models(models, segs).failures


# ------------------------------------------------------------- statistics


WORKED = np.array([  # 12 blocks x 3 treatments, includes ties
    [8.0, 7.0, 6.0], [8.5, 7.5, 6.5], [9.0, 8.0, 7.0], [7.0, 7.0, 5.0], [6.5, 7.0, 6.0], [8.0, 7.5, 7.5],
    [7.5, 6.5, 5.5], [9.5, 8.0, 8.5], [6.0, 6.5, 5.0], [8.0, 6.0, 7.0], [7.0, 7.5, 6.5], [8.5, 7.0, 7.0],
])


def test_friedman_matches_scipy_on_worked_dataset():
    ref = stats.friedmanchisquare(*WORKED.T)
    q, _ = friedman_statistic(WORKED)
    assert q == pytest.approx(ref.statistic, abs=1e-9)
    assert abs(friedman_test(WORKED) - ref.pvalue) < 1e-6


@given(st.integers(2, 15), st.integers(3, 6), st.integers(0, 10_000))
def test_friedman_matches_scipy_randomised(n, k, seed):
    x = np.random.default_rng(seed).integers(0, 4, size=(n, k)).astype(float)  # plenty of ties
    q, _ = friedman_statistic(x)
    if q == 0:
        return
    ref = stats.friedmanchisquare(*x.T)
    assert abs(friedman_test(x) - ref.pvalue) < 1e-6


def test_friedman_all_tied():
    x = np.tile(np.array([[1.0], [2.0], [3.0]]), (1, 4))
    q, ranks = friedman_statistic(x)
    assert q == 0 and friedman_test(x) == 1.0
    np.testing.assert_allclose(ranks, 2.5)


def test_friedman_rejects_degenerate():
    with pytest.raises(ValueError):
        friedman_test(np.ones((1, 3)))
    with pytest.raises(ValueError):
        friedman_test(np.ones((4, 1)))
    with pytest.raises(ValueError):
        friedman_test(np.array([[1.0, np.nan], [1.0, 2.0]]))


@given(st.integers(0, 10_000))
def test_friedman_invariant_to_monotone_transform(seed):
    x = np.random.default_rng(seed).uniform(0.1, 5, size=(6, 4))
    assert friedman_statistic(x)[0] == pytest.approx(friedman_statistic(np.log(x) * 3 + 7)[0])


def exact_permutation_p(scores):
    q_obs, _ = friedman_statistic(scores)
    n, k = scores.shape
    count = total = 0
    for combo in itertools.product(list(itertools.permutations(range(k))), repeat=n):
        q, _ = friedman_statistic(np.array(combo, dtype=float))
        total += 1
        count += q >= q_obs - 1e-12
    return count / total


def test_small_instance_against_permutation_distribution():
    # rank sums 4, 9, 11: statistic 6.5
    x = np.array([[0.1, 0.5, 0.9], [0.2, 0.4, 0.8], [0.3, 0.6, 0.7], [0.2, 0.9, 0.5]])
    assert friedman_statistic(x)[0] == pytest.approx(6.5)
    assert abs(friedman_test(x) - exact_permutation_p(x)) < 0.02


def test_hochberg_examples():
    np.testing.assert_allclose(hochberg_adjust([0.01, 0.03, 0.04]), [0.03, 0.04, 0.04])
    np.testing.assert_allclose(hochberg_adjust([0.2]), [0.2])
    np.testing.assert_allclose(hochberg_adjust([0.04, 0.01, 0.03]), [0.04, 0.03, 0.04])
    with pytest.raises(ValueError):
        hochberg_adjust([0.5, 1.2])


def test_hochberg_equal_p_matches_reference():
    p = [0.02] * 4
    ref = multipletests(p, method="simes-hochberg")[1]
    np.testing.assert_allclose(hochberg_adjust(p), ref)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_hochberg_matches_reference_and_is_monotone(p):
    adj = hochberg_adjust(p)
    ref = multipletests(p, method="simes-hochberg")[1]
    np.testing.assert_allclose(adj, ref, atol=1e-12)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= -1e-15)
    assert np.all((adj >= np.asarray(p) - 1e-15) & (adj <= 1))


def test_significance_report():
    rng = np.random.default_rng(0)
    base = rng.uniform(0.5, 1.0, 30)
    scores = np.column_stack([base + 0.5, base, base + 0.05 * rng.normal(size=30) + 0.2])
    rep = significance(scores, ["a", "b", "c"])
    assert rep.best == "b"
    assert set(rep.adjusted_p) == {"a", "c"}
    assert 0 <= rep.friedman_p < 0.01
    doc = json.loads(rep.to_json())
    assert doc["best"] == "b" and len(doc["comparisons"]) == 2
