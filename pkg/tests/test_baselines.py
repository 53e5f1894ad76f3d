import math

import numpy as np
import pytest

from hvacopt.baselines import (
    AsymptoteMode,
    DecayModel,
    FfnnCandidate,
    FfnnModel,
    MlrModel,
    PersistenceModel,
    RankDeficientError,
    UndefinedTauError,
    fit_decay,
    fit_ffnn,
    fit_mlr,
    fixed,
    fold_assignment,
    ffnn_loss_and_gradients,
    grid_search_cv,
    ols,
    one_step_pairs,
    predict_iterative_baseline,
)
from hvacopt.data_model import ModeSegment, OperationMode
from hvacopt.thermal_oracle import RoomPhysics, generate_corpus, passive_step

PC, AH = OperationMode.PASSIVE_COOLING, OperationMode.ACTIVE_HEATING


def linear_segments(a=0.9, b=0.1, c=0.0, d=0.0, n=8, length=10, seed=0):
    rng = np.random.default_rng(seed)
    segs = []
    for _ in range(n):
        out = rng.uniform(5, 15, length)
        ins = [rng.uniform(15, 22)]
        for t in range(length - 1):
            ins.append(a * ins[-1] + b * out[t] + c * out[t + 1] + d)
        segs.append(ModeSegment(PC, ins, out))
    return segs


# ------------------------------------------------------------------ MLR


def test_mlr_recovers_exact_generator():
    m = fit_mlr(linear_segments())
    np.testing.assert_allclose(m.coefficients, (0.9, 0.1, 0.0), atol=1e-8)
    assert abs(m.intercept) < 1e-8


def test_mlr_residuals_orthogonal_to_features():
    rng = np.random.default_rng(1)
    segs = [ModeSegment(PC, rng.uniform(15, 22, 9), rng.uniform(5, 15, 9)) for _ in range(6)]
    m = fit_mlr(segs)
    X, y = one_step_pairs(segs)
    resid = y - (X @ np.array(m.coefficients) + m.intercept)
    design = np.column_stack([X, np.ones(len(y))])
    assert np.max(np.abs(design.T @ resid)) < 1e-8


def test_ols_two_points_one_feature():
    coef, intercept = ols(np.array([[1.0], [3.0]]), np.array([2.0, 8.0]))
    # hand-solved: slope (8 - 2) / (3 - 1) = 3, intercept 2 - 3 = -1
    assert coef[0] == pytest.approx(3.0, abs=1e-12)
    assert intercept == pytest.approx(-1.0, abs=1e-12)


def test_ols_constant_target():
    rng = np.random.default_rng(2)
    coef, intercept = ols(rng.normal(size=(10, 3)), np.full(10, 4.2))
    np.testing.assert_allclose(coef, 0, atol=1e-10)
    assert intercept == pytest.approx(4.2)


def test_rank_deficient_design_names_columns():
    # constant outside makes outside_t and outside_next collinear with the intercept
    segs = [ModeSegment(PC, [20.0, 19.0, 18.5, 18.0], [10.0] * 4), ModeSegment(PC, [21.0, 20.0, 19.0, 18.2], [10.0] * 4)]
    with pytest.raises(RankDeficientError, match="outside"):
        fit_mlr(segs)


def test_mlr_zero_in_sample_error():
    segs = linear_segments(0.8, 0.15, 0.05, 0.2)
    m = fit_mlr(segs)
    for s in segs:
        np.testing.assert_allclose(predict_iterative_baseline(m, s.inside[0], s.outside), s.inside[1:], atol=1e-8)


# ------------------------------------------------------------------ FFNN


@pytest.mark.parametrize("structure,activation", [((), "tanh"), ((2,), "tanh"), ((2, 3), "sigmoid"), ((3,), "logistic")])
def test_ffnn_gradients_match_finite_differences(structure, activation):
    rng = np.random.default_rng(len(structure))
    sizes = (3,) + structure + (1,)
    model = FfnnModel(structure, tuple(rng.normal(0, 0.7, (i, o)) for i, o in zip(sizes, sizes[1:])),
                      tuple(rng.normal(0, 0.7, o) for o in sizes[1:]), activation)
    X, y = rng.normal(size=(7, 3)), rng.normal(size=7)
    _, grads = ffnn_loss_and_gradients(model, X, y)
    params = [p.copy() for p in model.parameters()]
    eps = 1e-6
    for j, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + eps
            up, _ = ffnn_loss_and_gradients(model.with_parameters(params), X, y)
            p[idx] = orig - eps
            down, _ = ffnn_loss_and_gradients(model.with_parameters(params), X, y)
            p[idx] = orig
            num = (up - down) / (2 * eps)
            assert abs(num - grads[j][idx]) <= 1e-4 * max(abs(num), abs(grads[j][idx]), 1e-6)


def test_ffnn_without_hidden_layer_matches_mlr():
    segs = linear_segments(0.9, 0.1, 0.02, 0.3, n=10, length=12)
    m = fit_mlr(segs)
    f = fit_ffnn(segs, (), "tanh", seed=0, threshold=1e-7, max_steps=200_000)
    for s in segs:
        diff = f.predict(s.inside[0], s.outside) - m.predict(s.inside[0], s.outside)
        assert np.max(np.abs(diff)) < 1e-3


def test_ffnn_deterministic_and_validated():
    segs = linear_segments(n=4)
    a = fit_ffnn(segs, (2,), seed=5, max_steps=300)
    b = fit_ffnn(segs, (2,), seed=5, max_steps=300)
    for x, y in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(x, y)
    with pytest.raises(ValueError):
        fit_ffnn(segs, (2,), activation="relu")
    with pytest.raises(ValueError):
        fit_ffnn(segs, (0,))


def test_ffnn_training_does_not_increase_loss():
    segs = linear_segments(n=6)
    X, y = one_step_pairs(segs)
    start = fit_ffnn(segs, (2, 3), seed=1, max_steps=0)
    end = fit_ffnn(segs, (2, 3), seed=1, max_steps=500)
    l0, _ = ffnn_loss_and_gradients(start, X / 20, y / 20)
    l1, _ = ffnn_loss_and_gradients(end, X / 20, y / 20)
    assert l1 <= l0


# ----------------------------------------------------------------- decay


def oracle_cooling(n, tau, noise, seed):
    return [s for s in generate_corpus(n, 0, (21, 51), physics=RoomPhysics(tau_passive=tau, noise_std=noise), seed=seed)]


def test_decay_recovers_tau_noiseless():
    m = fit_decay(oracle_cooling(10, 180.0, 0.0, 0))
    assert m.tau_estimate == pytest.approx(180.0, rel=1e-6)


def test_decay_recovers_tau_under_noise():
    m = fit_decay(oracle_cooling(68, 180.0, 0.05, 1))
    assert abs(m.tau_estimate - 180.0) / 180.0 < 0.10


def test_decay_inverts_the_worked_passive_example():
    seg = ModeSegment(PC, [20.0, 10 + 10 * math.exp(-0.25)], [10.0, 10.0])
    assert fit_decay([seg]).tau_estimate == pytest.approx(60.0, rel=1e-6)


def test_decay_errors():
    with pytest.raises(UndefinedTauError):
        fit_decay([ModeSegment(PC, [10.0, 10.0, 10.0], [10.0, 10.0, 10.0])])
    with pytest.raises(ValueError):
        fit_decay([])
    with pytest.raises(UndefinedTauError):
        fit_decay([ModeSegment(AH, [15.0, 15.0, 15.0], [5.0] * 3)], AsymptoteMode.FITTED_CONSTANT)
    with pytest.raises(ValueError):
        DecayModel(0.0)


def test_fitted_constant_recovers_plant():
    ph = RoomPhysics(tau_active=240.0, plant_temp=28.0, noise_std=0.0)
    segs = generate_corpus(0, 10, heating_len=(6, 6), physics=ph, seed=2)
    m = fit_decay(segs, AsymptoteMode.FITTED_CONSTANT)
    assert m.tau_estimate == pytest.approx(240.0, rel=1e-6)
    assert m.asymptote == pytest.approx(28.0, rel=1e-6)


def test_oracle_decay_reproduces_passive_trajectory():
    ph = RoomPhysics(tau_passive=300.0, noise_std=0.0)
    model = DecayModel.passive_from_physics(ph)
    out = np.linspace(8, 12, 20)
    t, expected = 21.0, []
    for k in range(19):
        t = passive_step(t, out[k], ph)
        expected.append(t)
    np.testing.assert_allclose(model.predict(21.0, out), expected, atol=1e-9)


def test_persistence_is_constant():
    out = PersistenceModel().predict(19.3, [1.0, 2.0, 3.0, 4.0])
    assert list(out) == [19.3] * 3
    assert PersistenceModel().predict(19.3, [1.0]).size == 0


# ----------------------------------------------------------- grid search


def test_folds_partition_and_are_seeded():
    folds = fold_assignment(23, 10, seed=4)
    assert sorted(np.concatenate(folds).tolist()) == list(range(23))
    assert all(len(f) in (2, 3) for f in folds)
    again = fold_assignment(23, 10, seed=4)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
    with pytest.raises(ValueError):
        fold_assignment(5, 10)


def test_grid_search_single_candidate_and_k_check():
    segs = oracle_cooling(12, 180.0, 0.0, 0)
    only = fixed(PersistenceModel())
    assert grid_search_cv(segs, [only]) is only
    with pytest.raises(ValueError):
        grid_search_cv(segs[:5], [only, only], k=10)


def test_grid_search_picks_oracle_tau():
    segs = oracle_cooling(12, 180.0, 0.0, 3)
    taus = [60.0, 120.0, 180.0, 240.0, 600.0]
    grid = [fixed(DecayModel(t)) for t in taus]
    assert grid_search_cv(segs, grid, k=10) is grid[2]


def test_grid_search_tie_prefers_earliest():
    segs = oracle_cooling(12, 180.0, 0.0, 3)
    a, b = fixed(DecayModel(180.0)), fixed(DecayModel(180.0))
    assert grid_search_cv(segs, [a, b], k=4) is a


def test_ffnn_candidate_fits():
    segs = linear_segments(n=10)
    model = FfnnCandidate((2,), max_steps=50)(segs)
    assert isinstance(model, FfnnModel) and model.structure == (2,)


def test_all_baselines_honour_iterative_contract():
    segs = linear_segments(n=6)
    models = [PersistenceModel(), fit_mlr(segs), fit_ffnn(segs, (2,), max_steps=50), fit_decay(segs), MlrModel((1, 0, 0), 0)]
    for m in models:
        assert predict_iterative_baseline(m, 20.0, [10.0] * 7).shape == (6,)
