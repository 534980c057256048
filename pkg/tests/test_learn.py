import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit

from cvrpxai.learn import (
    KINDS,
    ConfusionMatrix,
    Tree,
    TrainedModel,
    confusion_matrix,
    evaluate,
    evaluate_predictions,
    f_beta,
    fit,
    load_model,
    log_loss,
    read_evaluation_csv,
    save_model,
    scores_from_matrix,
    write_evaluation_csv,
)
from cvrpxai.learn.trees import bin_features, quantile_bin_edges

SMALL = {
    "random_forest": {"n_trees": 15},
    "gradient_boosting_levelwise": {"n_rounds": 20},
    "gradient_boosting_leafwise_hist": {"n_rounds": 20},
}


def toy(n=120, d=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.7 * X[:, 1] + rng.normal(scale=0.5, size=n) > 0).astype(int)
    return X, y


# --- metrics -------------------------------------------------------------------

@pytest.mark.parametrize("p, r, f1", [(0.672, 0.661, 0.666), (0.870, 0.907, 0.888)])
def test_f1_from_published_precision_recall(p, r, f1):
    assert abs(f_beta(p, r) - f1) <= 0.0005


@given(p=st.floats(0, 1))
def test_f1_of_equal_precision_recall(p):
    assert f_beta(p, p) == pytest.approx(p, abs=1e-15)


@given(p=st.floats(0, 1), r=st.floats(0, 1), beta=st.floats(0.1, 5))
def test_f_beta_properties(p, r, beta):
    f = f_beta(p, r, beta)
    assert 0 <= f <= 1 + 1e-12
    f1 = f_beta(p, r)
    assert f1 <= max(p, r) + 1e-12
    if p > 0 and r > 0:
        assert f1 == pytest.approx(2 / (1 / p + 1 / r), rel=1e-12)


def test_perfect_predictions():
    y = np.array([1, 1, 0, 1, 0, 1, 1, 0, 1, 0])
    ev = evaluate_predictions(y, y)
    assert ev.matrix.as_array().tolist() == [[4, 0], [0, 6]]
    assert ev.f_beta == 1.0
    assert not ev.degenerate


def test_degenerate_precision_is_flagged():
    ev = evaluate_predictions(np.array([1, 1, 0]), np.array([0, 0, 0]))
    assert ev.precision == 0.0 and ev.precision_undefined
    assert ev.recall == 0.0 and not ev.recall_undefined
    assert ev.f_beta == 0.0
    ev = scores_from_matrix(ConfusionMatrix(5, 1, 0, 0))
    assert ev.recall_undefined and ev.precision_undefined is False


def test_empty_evaluation_set():
    with pytest.raises(ValueError):
        evaluate_predictions(np.array([]), np.array([]))


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200))
def test_confusion_matrix_against_loop(pairs):
    y_true = np.array([a for a, _ in pairs])
    y_pred = np.array([b for _, b in pairs])
    tn = fp = fn = tp = 0
    for t, p in pairs:
        if t and p:
            tp += 1
        elif t:
            fn += 1
        elif p:
            fp += 1
        else:
            tn += 1
    cm = confusion_matrix(y_true, y_pred)
    assert (cm.tn, cm.fp, cm.fn, cm.tp) == (tn, fp, fn, tp)
    assert cm.total == len(pairs)


def test_evaluation_csv_round_trip():
    ev = evaluate_predictions(np.array([1, 0, 1, 1]), np.array([1, 1, 0, 1]))
    text = write_evaluation_csv([("S1", "knn", ev)])
    assert text.splitlines()[0] == "scenario,classifier,precision,recall,f1"
    assert read_evaluation_csv(text) == [("S1", "knn", ev.precision, ev.recall, ev.f_beta)]


# --- classifiers ------------------------------------------------------------------

def test_tree_separates_axis_aligned_data():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(80, 2))
    y = ((X[:, 0] > 0.2) & (X[:, 1] < 0.5)).astype(int)
    model = fit("decision_tree", {"min_leaf": 1}, X, y)
    assert np.mean(model.predict(X) == y) == 1.0


def test_knn_with_k_equal_n_predicts_majority():
    X, y = toy(31)
    model = fit("knn", {"k": 31}, X, y)
    majority = int(y.mean() >= 0.5)
    rng = np.random.default_rng(2)
    assert np.all(model.predict(rng.normal(size=(50, 5))) == majority)


def test_knn_k_larger_than_training_set():
    X, y = toy(10)
    with pytest.raises(ValueError):
        fit("knn", {"k": 11}, X, y)


@pytest.mark.parametrize("kind", KINDS[1:])
def test_single_class_training_set_is_rejected(kind):
    X, _ = toy(20)
    with pytest.raises(ValueError, match="both classes"):
        fit(kind, None, X, np.ones(20, dtype=int))


def test_threshold_at_one_half():
    X = np.zeros((1, 1))
    half = fit("decision_tree", {"max_depth": 0}, np.zeros((4, 1)), np.array([0, 1, 0, 1]))
    assert half.predict_score(X)[0] == 0.5
    assert half.predict(X)[0] == 1
    below = TrainedModel("decision_tree", {}, 1, (Tree.stump(0.49),))
    assert below.predict(X)[0] == 0


def test_identical_trees_voting_one():
    model = TrainedModel("random_forest", {}, 2, (Tree.stump(1.0),) * 3, tree_weight=1 / 3)
    assert model.predict_score(np.zeros((3, 2))) == pytest.approx([1.0, 1.0, 1.0], abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_non_finite_input_is_rejected(kind):
    X, y = toy()
    model = fit(kind, SMALL.get(kind), X, y)
    bad = X[:2].copy()
    bad[1, 3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        model.predict_score(bad)
    with pytest.raises(ValueError):
        model.predict_score(X[:, :3])


@pytest.mark.parametrize("kind", KINDS)
def test_scores_in_unit_interval_and_deterministic(kind, tmp_path):
    X, y = toy()
    model = fit(kind, SMALL.get(kind), X, y)
    again = fit(kind, SMALL.get(kind), X, y)
    s = model.predict_score(X)
    assert np.all((s >= 0) & (s <= 1))
    assert np.array_equal(s, again.predict_score(X))
    assert np.array_equal(model.predict(X), (s >= 0.5).astype(int))
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.kind == kind
    assert np.array_equal(loaded.predict_score(X), s)
    ev = evaluate(model, X, y)
    assert ev.matrix.total == len(y)


def test_model_file_version_check(tmp_path):
    X, y = toy()
    path = tmp_path / "m.json"
    save_model(fit("decision_tree", None, X, y), path)
    text = path.read_text().replace('"version": 1', '"version": 99')
    path.write_text(text)
    with pytest.raises(ValueError, match="version"):
        load_model(path)


def test_forest_of_one_full_tree_is_the_tree():
    X, y = toy(150, 6, seed=3)
    tree = fit("decision_tree", None, X, y)
    forest = fit("random_forest", {"n_trees": 1, "bootstrap": False, "max_features": 6}, X, y)
    for name in ("feature", "threshold", "left", "right", "value"):
        assert np.array_equal(getattr(tree.trees[0], name), getattr(forest.trees[0], name))
    Z = np.random.default_rng(4).normal(size=(40, 6))
    assert np.array_equal(tree.predict_score(Z), forest.predict_score(Z))


def test_tree_respects_depth_and_leaf_size():
    X, y = toy(300, 4, seed=5)
    model = fit("decision_tree", {"max_depth": 3, "min_leaf": 7}, X, y)
    t = model.trees[0]
    assert t.depth <= 3
    assert t.n_samples[t.feature < 0].min() >= 7


@pytest.mark.parametrize("kind", ["gradient_boosting_levelwise", "gradient_boosting_leafwise_hist"])
def test_boosting_loss_never_increases(kind):
    X, y = toy(200, 5, seed=6)
    model = fit(kind, {"n_rounds": 40}, X, y)
    margin = np.full(len(y), model.base)
    losses = []
    for tree in model.trees:
        margin = margin + tree.predict(X)
        p = expit(margin)
        losses.append(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert log_loss(model, X, y) == pytest.approx(losses[-1], rel=1e-12)


def test_leafwise_tree_leaf_budget():
    X, y = toy(400, 5, seed=7)
    model = fit("gradient_boosting_leafwise_hist", {"n_rounds": 3, "max_leaves": 9, "min_leaf": 1}, X, y)
    for t in model.trees:
        assert np.sum(t.feature < 0) <= 9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n_bins=st.integers(2, 64))
def test_bin_codes_match_thresholds(seed, n_bins):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(100, 3)), 1)  # repeated values on purpose
    edges = quantile_bin_edges(X, n_bins)
    codes = bin_features(X, edges)
    for j, e in enumerate(edges):
        for b in range(len(e)):
            assert np.array_equal(codes[:, j] <= b, X[:, j] <= e[b])


def _best_stump(x, r):
    """Exhaustive split search maximising S_L^2/n_L + S_R^2/n_R over one feature."""
    best = (-math.inf, None)
    for t in np.unique(x)[:-1]:
        left = x <= t
        sl, sr = r[left].sum(), r[~left].sum()
        score = sl ** 2 / left.sum() + sr ** 2 / (~left).sum()
        if score > best[0] + 1e-12:
            best = (score, left)
    return best


def test_two_boosting_rounds_by_hand():
    rng = np.random.default_rng(8)
    X = rng.uniform(0, 10, size=(20, 2))
    y = np.array([0, 1] * 10)
    y[X[:, 0] > 6] = 1
    lr = 0.3
    # hand calculation: start from the log-odds of the base rate
    F = np.full(20, math.log(y.mean() / (1 - y.mean())))
    for _ in range(2):
        p = 1 / (1 + np.exp(-F))
        r = y - p
        h = p * (1 - p)
        cands = [_best_stump(X[:, j], r) for j in range(2)]
        _, left = max(cands, key=lambda c: c[0])
        step = np.where(left, lr * r[left].sum() / h[left].sum(), lr * r[~left].sum() / h[~left].sum())
        F = F + step
    expected = 1 / (1 + np.exp(-F))
    model = fit("gradient_boosting_levelwise", {"n_rounds": 2, "learning_rate": lr, "max_depth": 1,
                                                "min_leaf": 1}, X, y)
    assert model.predict_score(X) == pytest.approx(expected, abs=1e-12)


def test_unknown_kind():
    X, y = toy()
    with pytest.raises(ValueError):
        fit("svm", None, X, y)
