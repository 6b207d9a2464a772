"""Kernel ridge regression on precomputed Gram matrices.

Node classification is handled as ridge regression onto one-hot targets
followed by a row-wise argmax; regression predicts the scalar target
directly.  The ridge may be exactly zero, in which case the solve relies
on the usual escalating jitter (1e-10 .. 1e-6, scaled by the diagonal) and
raises NumericalError if the Gram stays unfactorable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from .errors import DegenerateError, NumericalError, ValidationError

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def default_lambda_grid() -> np.ndarray:
    """25 ridge values, log-spaced over [1e-3, 10]."""
    return np.logspace(-3.0, 1.0, 25)


@dataclass
class FitConfig:
    """Grid-search settings; the default grid follows the usual protocol."""

    lambda_grid: np.ndarray = field(default_factory=default_lambda_grid)
    metric: str | None = None  # None = pick by task
    jitter: float = 1e-10

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=np.float64)
        if grid.size == 0:
            raise ValidationError("lambda grid must be nonempty")
        if (grid <= 0).any():
            raise ValidationError("lambda grid must be positive")
        if grid.size > 1 and (np.diff(grid) <= 0).any():
            raise ValidationError("lambda grid must be strictly increasing")
        object.__setattr__(self, "lambda_grid", grid)


@dataclass
class Prediction:
    """Predicted values for every node (train nodes included)."""

    values: np.ndarray  # (n,) regression | (n, classes) classification scores
    hard_labels: np.ndarray | None = None  # (n,) argmax labels, classification only
    variance: np.ndarray | None = None  # (n,) posterior variance if requested
    lam: float = 0.0


@dataclass
class GridSearchResult:
    best_lambda: float
    val_score: float
    test_score: float
    table: list = field(default_factory=list)  # (lambda, val_score) pairs
    metric: str = "accuracy"


def _check_gram(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValidationError(f"Gram matrix must be square, got {k.shape}")
    if not np.isfinite(k).all():
        raise NumericalError("Gram matrix contains non-finite entries")
    if not np.allclose(k, k.T, atol=1e-8 * max(1.0, float(np.abs(k).max()))):
        raise ValidationError("Gram matrix must be symmetric")
    return k


def _targets(y: np.ndarray, train_idx: np.ndarray, task: str, num_classes):
    if task == "classification":
        ytr = np.asarray(y, dtype=np.int64)[train_idx]
        if (ytr < 0).any():
            raise ValidationError("train nodes must carry labels")
        c = int(num_classes) if num_classes else int(ytr.max()) + 1
        onehot = np.zeros((len(train_idx), c))
        onehot[np.arange(len(train_idx)), ytr] = 1.0
        return onehot
    if task == "regression":
        ytr = np.asarray(y, dtype=np.float64)[train_idx]
        if not np.isfinite(ytr).all():
            raise ValidationError("train nodes must carry finite targets")
        return ytr[:, None]
    raise ValidationError("task must be 'classification' or 'regression'")


def _factor_train_block(ktt: np.ndarray, lam: float):
    scale = max(float(np.diag(ktt).max()), 1.0)
    base = ktt + lam * np.eye(ktt.shape[0])
    for jit in _JITTERS:
        try:
            return sl.cho_factor(base + jit * scale * np.eye(ktt.shape[0]), lower=True)
        except sl.LinAlgError:
            continue
    raise NumericalError(
        f"train Gram not positive definite even with jitter at ridge {lam}"
    )


def krr_predict(
    k: np.ndarray,
    y: np.ndarray,
    train_idx: np.ndarray,
    lam: float,
    task: str = "classification",
    num_classes: int | None = None,
    return_variance: bool = False,
) -> Prediction:
    """Kernel ridge prediction at every node from labelled train nodes.

    ``lam >= 0``; classification returns per-class scores plus argmax
    labels (ties resolve to the lowest class index).
    """
    if lam < 0:
        raise ValidationError(f"ridge must be non-negative, got {lam}")
    k = _check_gram(k)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ValidationError("empty train index set")
    if train_idx.min() < 0 or train_idx.max() >= k.shape[0]:
        raise ValidationError("train indices out of range")
    if len(np.unique(train_idx)) != train_idx.size:
        raise ValidationError("duplicate train indices")
    targets = _targets(y, train_idx, task, num_classes)
    ktt = k[np.ix_(train_idx, train_idx)]
    factor = _factor_train_block(ktt, float(lam))
    alpha = sl.cho_solve(factor, targets)
    values = k[:, train_idx] @ alpha  # (n, c)
    variance = None
    if return_variance:
        sol = sl.cho_solve(factor, k[train_idx, :])  # (t, n)
        quad = np.sum(k[:, train_idx] * sol.T, axis=1)
        variance = np.maximum(np.diag(k) - quad, 0.0)
    if task == "classification":
        return Prediction(
            values=values,
            hard_labels=values.argmax(axis=1).astype(np.int64),
            variance=variance,
            lam=float(lam),
        )
    return Prediction(values=values[:, 0], variance=variance, lam=float(lam))


def accuracy(pred_labels: np.ndarray, y: np.ndarray, idx: np.ndarray) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValidationError("empty evaluation index set")
    return float(np.mean(np.asarray(pred_labels)[idx] == np.asarray(y)[idx]))


def r_squared(pred_values: np.ndarray, y: np.ndarray, idx: np.ndarray) -> float:
    """Coefficient of determination over the given nodes.

    A constant target is degenerate: returns 1.0 when the predictions are
    exact, otherwise raises DegenerateError (no well-defined score).
    """
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValidationError("empty evaluation index set")
    yt = np.asarray(y, dtype=np.float64)[idx]
    yp = np.asarray(pred_values, dtype=np.float64)[idx]
    ss_res = float(np.sum((yt - yp) ** 2))
    ss_tot = float(np.sum((yt - yt.mean()) ** 2))
    if ss_tot == 0.0:
        if ss_res <= 1e-12 * max(1.0, float(np.sum(yt**2))):
            return 1.0
        raise DegenerateError("constant target with non-zero residual")
    return 1.0 - ss_res / ss_tot


def evaluate(pred: Prediction, y: np.ndarray, idx: np.ndarray, metric: str) -> float:
    if metric == "accuracy":
        if pred.hard_labels is None:
            raise ValidationError("accuracy needs classification predictions")
        return accuracy(pred.hard_labels, y, idx)
    if metric == "r2":
        if pred.values.ndim != 1:
            raise ValidationError("r2 needs scalar regression predictions")
        return r_squared(pred.values, y, idx)
    raise ValidationError("metric must be 'accuracy' or 'r2'")


def _scores_for_grid(k, y, train_idx, eval_idx, lambdas, task, num_classes):
    """Validation scores for all ridges from one eigendecomposition."""
    targets = _targets(y, train_idx, task, num_classes)
    ktt = k[np.ix_(train_idx, train_idx)]
    evals, evecs = sl.eigh(ktt)
    scale = max(float(evals.max()), 1.0)
    if evals.min() < -1e-8 * scale:
        raise NumericalError("train Gram has significantly negative eigenvalues")
    evals = np.maximum(evals, 0.0)
    proj = evecs.T @ targets
    kxt = k[np.ix_(eval_idx, train_idx)] @ evecs
    scores = []
    for lam in lambdas:
        denom = evals + lam
        if denom.min() <= 0:
            raise NumericalError(f"singular train Gram at ridge {lam}")
        values = kxt @ (proj / denom[:, None])
        if task == "classification":
            hard = values.argmax(axis=1)
            scores.append(accuracy(hard, y[eval_idx], np.arange(len(eval_idx))))
        else:
            scores.append(r_squared(values[:, 0], y[eval_idx], np.arange(len(eval_idx))))
    return scores


def grid_search(
    k: np.ndarray,
    y: np.ndarray,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    test_idx: np.ndarray | None = None,
    config: FitConfig | None = None,
    task: str = "classification",
    num_classes: int | None = None,
) -> GridSearchResult:
    """Pick the ridge with the best validation score; ties keep the
    smallest ridge.  All ridges share one eigendecomposition of the train
    block, so the sweep costs one extra matmul per ridge."""
    k = _check_gram(k)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    val_idx = np.asarray(val_idx, dtype=np.int64)
    if val_idx.size == 0:
        raise ValidationError("grid search needs a validation split")
    config = config or FitConfig()
    lambdas = config.lambda_grid
    metric = config.metric or ("accuracy" if task == "classification" else "r2")
    expected = "accuracy" if task == "classification" else "r2"
    if metric != expected:
        raise ValidationError(f"metric {metric!r} does not fit task {task!r}")
    y = np.asarray(y)
    val_scores = _scores_for_grid(k, y, train_idx, val_idx, lambdas, task, num_classes)
    best = int(np.argmax(val_scores))  # first max = smallest ridge on ties
    best_lam = float(lambdas[best])
    test_score = float("nan")
    if test_idx is not None and len(test_idx) > 0:
        pred = krr_predict(k, y, train_idx, best_lam, task, num_classes)
        test_score = evaluate(pred, y, np.asarray(test_idx, np.int64), metric)
    return GridSearchResult(
        best_lambda=best_lam,
        val_score=float(val_scores[best]),
        test_score=test_score,
        table=[(float(l), float(s)) for l, s in zip(lambdas, val_scores)],
        metric=metric,
    )
