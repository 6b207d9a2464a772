import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gntk.errors import DegenerateError, NumericalError, ValidationError
from gntk.regression import (
    FitConfig,
    accuracy,
    default_lambda_grid,
    evaluate,
    grid_search,
    krr_predict,
    r_squared,
)


def spd_gram(rng, n, d=None):
    b = rng.standard_normal((n, d or n + 2))
    return b @ b.T + 0.5 * np.eye(n)


def test_zero_ridge_interpolates_train_targets(rng):
    k = spd_gram(rng, 12)
    y = rng.standard_normal(12)
    tr = np.array([0, 2, 3, 7, 9])
    pred = krr_predict(k, y, tr, lam=0.0, task="regression")
    assert np.allclose(pred.values[tr], y[tr], atol=1e-7)


def test_ridge_shrinks_train_fit(rng):
    k = spd_gram(rng, 10)
    y = rng.standard_normal(10)
    tr = np.arange(6)
    exact = krr_predict(k, y, tr, lam=0.0, task="regression")
    rough = krr_predict(k, y, tr, lam=5.0, task="regression")
    res_exact = np.abs(exact.values[tr] - y[tr]).max()
    res_rough = np.abs(rough.values[tr] - y[tr]).max()
    assert res_exact < res_rough


def test_negative_ridge_rejected(rng):
    k = spd_gram(rng, 4)
    with pytest.raises(ValidationError):
        krr_predict(k, np.zeros(4), np.arange(2), lam=-1e-6, task="regression")


def test_train_index_validation(rng):
    k = spd_gram(rng, 5)
    y = np.zeros(5)
    with pytest.raises(ValidationError):
        krr_predict(k, y, np.array([], dtype=int), lam=0.1, task="regression")
    with pytest.raises(ValidationError):
        krr_predict(k, y, np.array([0, 5]), lam=0.1, task="regression")
    with pytest.raises(ValidationError):
        krr_predict(k, y, np.array([1, 1]), lam=0.1, task="regression")


def test_gram_validation(rng):
    with pytest.raises(ValidationError):
        krr_predict(rng.standard_normal((3, 4)), np.zeros(3), [0], 0.1)
    lop = rng.standard_normal((4, 4))
    with pytest.raises(ValidationError):
        krr_predict(lop + lop.T + np.triu(np.ones((4, 4))), np.zeros(4), [0], 0.1)
    bad = np.eye(3)
    bad[1, 1] = np.nan
    with pytest.raises(NumericalError):
        krr_predict(bad, np.zeros(3), [0], 0.1)


def test_unlabelled_train_node_rejected(rng):
    k = spd_gram(rng, 5)
    y = np.array([0, 1, -1, 0, 1])
    with pytest.raises(ValidationError):
        krr_predict(k, y, np.array([0, 2]), lam=0.1, task="classification")


def test_classification_scores_and_argmax(rng):
    k = spd_gram(rng, 8)
    y = np.array([0, 1, 2, 0, 1, 2, 0, 1])
    pred = krr_predict(k, y, np.arange(6), lam=1e-6, task="classification")
    assert pred.values.shape == (8, 3)
    assert pred.hard_labels.shape == (8,)
    # near-zero ridge reproduces the train labels
    assert (pred.hard_labels[:6] == y[:6]).all()


def test_argmax_tie_takes_lowest_class():
    # identity gram: test node 2 has zero cross-kernel to both train nodes,
    # so its class scores tie at zero
    k = np.eye(3)
    y = np.array([0, 1, -1])
    pred = krr_predict(k, y, np.array([0, 1]), lam=0.5, task="classification")
    assert pred.values[2, 0] == pred.values[2, 1] == 0.0
    assert pred.hard_labels[2] == 0


def test_num_classes_widens_score_matrix(rng):
    k = spd_gram(rng, 6)
    y = np.array([0, 1, 0, 1, 0, 1])
    pred = krr_predict(k, y, np.arange(4), lam=0.1, num_classes=5)
    assert pred.values.shape == (6, 5)
    assert np.allclose(pred.values[:, 2:], 0.0)


def test_variance_nonnegative_and_zero_on_train(rng):
    k = spd_gram(rng, 10)
    y = rng.standard_normal(10)
    tr = np.arange(5)
    pred = krr_predict(k, y, tr, lam=0.0, task="regression", return_variance=True)
    assert (pred.variance >= 0.0).all()
    assert np.all(pred.variance[tr] <= 1e-6 * k.diagonal().max())
    assert (pred.variance[5:] > 1e-4).any()


def test_permutation_equivariance(rng):
    n = 9
    k = spd_gram(rng, n)
    y = rng.standard_normal(n)
    tr = np.array([0, 3, 4, 8])
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    pred = krr_predict(k, y, tr, lam=0.3, task="regression")
    pred_p = krr_predict(k[np.ix_(perm, perm)], y[perm], inv[tr], lam=0.3,
                         task="regression")
    assert np.allclose(pred_p.values, pred.values[perm], atol=1e-10)


def test_r_squared_scores_only_requested_nodes():
    y = np.array([1.0, 2.0, 3.0, 50.0])
    pred = np.array([1.0, 2.0, 3.0, -7.0])
    assert r_squared(pred, y, np.arange(3)) == pytest.approx(1.0)
    assert r_squared(pred, y, np.arange(4)) < 1.0


def test_r_squared_constant_target_branches():
    y = np.full(4, 2.5)
    assert r_squared(np.full(4, 2.5), y, np.arange(4)) == 1.0
    with pytest.raises(DegenerateError):
        r_squared(np.array([2.5, 2.5, 2.5, 2.6]), y, np.arange(4))
    with pytest.raises(ValidationError):
        r_squared(y, y, np.array([], dtype=int))


def test_accuracy_basics():
    labels = np.array([0, 1, 1, 2])
    truth = np.array([0, 1, 2, 2])
    assert accuracy(labels, truth, np.arange(4)) == 0.75
    assert accuracy(labels, truth, np.array([2])) == 0.0
    with pytest.raises(ValidationError):
        accuracy(labels, truth, np.array([], dtype=int))


def test_evaluate_dispatch(rng):
    k = spd_gram(rng, 6)
    y = np.array([0, 1, 0, 1, 0, 1])
    pred = krr_predict(k, y, np.arange(4), lam=0.1, task="classification")
    assert 0.0 <= evaluate(pred, y, np.arange(4, 6), "accuracy") <= 1.0
    with pytest.raises(ValidationError):
        evaluate(pred, y, np.arange(4, 6), "r2")  # scores are (n, c), not values
    reg = krr_predict(k, rng.standard_normal(6), np.arange(4), lam=0.1,
                      task="regression")
    with pytest.raises(ValidationError):
        evaluate(reg, y, np.arange(4, 6), "accuracy")
    with pytest.raises(ValidationError):
        evaluate(reg, y, np.arange(4, 6), "rmse")


def test_fit_config_grid_validation():
    assert len(FitConfig().lambda_grid) == 25
    assert np.allclose(FitConfig().lambda_grid, default_lambda_grid())
    with pytest.raises(ValidationError):
        FitConfig(lambda_grid=[])
    with pytest.raises(ValidationError):
        FitConfig(lambda_grid=[0.0, 1.0])
    with pytest.raises(ValidationError):
        FitConfig(lambda_grid=[1.0, 0.5])
    with pytest.raises(ValidationError):
        FitConfig(lambda_grid=[0.5, 0.5])


def test_grid_search_reports_table_and_test_score(rng):
    k = spd_gram(rng, 20)
    y = (rng.standard_normal(20) > 0).astype(int)
    res = grid_search(k, y, np.arange(10), np.arange(10, 15), np.arange(15, 20))
    assert len(res.table) == 25
    assert res.metric == "accuracy"
    assert any(lam == res.best_lambda for lam, _ in res.table)
    assert res.val_score == max(s for _, s in res.table)
    assert 0.0 <= res.test_score <= 1.0
    no_test = grid_search(k, y, np.arange(10), np.arange(10, 15))
    assert np.isnan(no_test.test_score)


def test_grid_search_tie_takes_smallest_ridge(rng):
    # two tight clusters: validation accuracy is 1.0 across the whole grid
    blocks = np.kron(np.eye(2), np.full((5, 5), 0.95))
    k = blocks + 0.05 * np.eye(10)
    y = np.repeat([0, 1], 5)
    cfg = FitConfig(lambda_grid=[1e-3, 1e-2, 1e-1, 1.0])
    res = grid_search(k, y, np.array([0, 1, 5, 6]), np.array([2, 7]),
                      config=cfg)
    scores = [s for _, s in res.table]
    assert scores.count(max(scores)) > 1
    assert res.best_lambda == 1e-3


def test_grid_search_metric_must_match_task(rng):
    k = spd_gram(rng, 8)
    y = np.array([0, 1, 0, 1, 0, 1, 0, 1])
    with pytest.raises(ValidationError):
        grid_search(k, y, np.arange(4), np.arange(4, 6),
                    config=FitConfig(metric="r2"))
    with pytest.raises(ValidationError):
        grid_search(k, y.astype(float), np.arange(4), np.arange(4, 6),
                    config=FitConfig(metric="accuracy"), task="regression")
    with pytest.raises(ValidationError):
        grid_search(k, y, np.arange(4), np.array([], dtype=int))


def test_grid_search_regression_uses_r2(rng):
    # low-dimensional features make the target learnable from 8 train nodes
    b = rng.standard_normal((16, 3))
    k = b @ b.T + 0.05 * np.eye(16)
    y = b @ rng.standard_normal(3)
    res = grid_search(k, y, np.arange(8), np.arange(8, 12), np.arange(12, 16),
                      task="regression")
    assert res.metric == "r2"
    assert res.val_score > 0.5


@settings(max_examples=20)
@given(seed=st.integers(0, 2**31 - 1), lam_pos=st.integers(0, 24))
def test_grid_table_matches_direct_solve(seed, lam_pos):
    """The shared-eigendecomposition sweep equals a per-ridge Cholesky solve."""
    rng = np.random.default_rng(seed)
    k = spd_gram(rng, 12)
    y = rng.integers(0, 3, size=12)
    tr, val = np.arange(6), np.arange(6, 10)
    res = grid_search(k, y, tr, val)
    lam, table_score = res.table[lam_pos]
    pred = krr_predict(k, y, tr, lam=lam, task="classification")
    assert evaluate(pred, y, val, "accuracy") == pytest.approx(table_score)
