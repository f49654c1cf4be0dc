"""Margin-grid search over uncertainty-selected counterfactual augmentation.

The base model's scores on the real training rows decide which rows are
"uncertain" (score within ``alpha`` of 0.5). For each ``alpha`` on the grid
the counterfactuals of the uncertain rows are appended to the training set,
a fresh model is fit, and the validation-accuracy winner is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .counterfactual import CounterfactualSet, build_counterfactual_set
from .data import Dataset
from .exceptions import AlphaOutOfRange, SingleClassTraining
from .linear import LinearModel, TrainConfig, decision_function, predict_label, predict_score, train
from .metrics import accuracy


@dataclass(frozen=True)
class MarginGrid:
    alphas: tuple[float, ...]
    K: int | None = None

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise ValueError("empty margin grid")
        if any(not 0.0 <= a <= 0.5 for a in alphas):
            raise AlphaOutOfRange(f"grid values must lie in [0, 0.5]: {alphas}")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError(f"grid must be strictly increasing: {alphas}")
        if self.K is None:
            object.__setattr__(self, "K", len(alphas))

    def __len__(self):
        return len(self.alphas)


def make_margin_grid(K) -> MarginGrid:
    """``[0, 0.5/K, 2*0.5/K, ..., 0.5]``: K evenly spaced margins plus zero."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return MarginGrid((0.0,) + tuple(0.5 * k / K for k in range(1, K + 1)), K)


def uncertain_indices(scores, alpha):
    """Indices with ``0.5 - alpha <= score <= 0.5 + alpha`` (both bounds inclusive)."""
    if not 0.0 <= alpha <= 0.5:
        raise AlphaOutOfRange(f"alpha must lie in [0, 0.5], got {alpha}")
    s = np.asarray(scores, dtype=float)
    return np.flatnonzero((s >= 0.5 - alpha) & (s <= 0.5 + alpha))


@dataclass(frozen=True)
class GridPoint:
    alpha: float
    n_uncertain: int
    n_train_augmented: int
    val_accuracy: float


@dataclass(frozen=True)
class CcralTrace:
    points: tuple[GridPoint, ...]
    selected_k: int
    selected_alpha: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "selected_alpha", self.points[self.selected_k].alpha)

    @property
    def val_accuracy(self):
        return [p.val_accuracy for p in self.points]

    def to_dict(self):
        return {
            "grid": [
                {"alpha": p.alpha, "n_uncertain": p.n_uncertain,
                 "n_train_augmented": p.n_train_augmented, "val_accuracy": p.val_accuracy}
                for p in self.points
            ],
            "selected_k": self.selected_k,
            "selected_alpha": self.selected_alpha,
        }


def augment(train_ds: Dataset, cfs: CounterfactualSet, positions) -> Dataset:
    if len(positions) == 0:
        return train_ds
    return train_ds.concat(cfs.as_dataset(positions, train_ds.feature_names))


def run_standard(train_ds: Dataset, cfg: TrainConfig) -> LinearModel:
    return train(train_ds, cfg)


def run_counterfactual_all(train_ds: Dataset, cfg: TrainConfig, cfs=None) -> LinearModel:
    if cfs is None:
        cfs = build_counterfactual_set(train_ds)
    return train(augment(train_ds, cfs, np.arange(len(cfs))), cfg)


def run_ccral(train_ds: Dataset, val_ds: Dataset, cfg: TrainConfig, grid: MarginGrid,
              cfs=None):
    """Return ``(model, trace)`` for the validation-best margin.

    Ties on validation accuracy go to the smallest margin. ``cfs`` may pass
    a precomputed counterfactual set for ``train_ds``.
    """
    if val_ds.n == 0:
        raise ValueError("empty validation set")
    base = train(train_ds, cfg)
    if cfs is None:
        cfs = build_counterfactual_set(train_ds)
    scores = predict_score(base, train_ds.X[cfs.source_index])

    points, models = [], []
    for alpha in grid.alphas:
        chosen = uncertain_indices(scores, alpha)
        model = train(augment(train_ds, cfs, chosen), cfg)
        acc = accuracy(val_ds.y, predict_label(model, val_ds.X))
        points.append(GridPoint(alpha, len(chosen), train_ds.n + len(chosen), acc))
        models.append(model)
    best = max(range(len(points)), key=lambda k: (points[k].val_accuracy, -k))
    return models[best], CcralTrace(tuple(points), best)


class CCRALClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn estimator for the margin-grid augmentation procedure.

    ``treatment_index`` is the column of ``X`` holding the 0/1 treatment.
    Without explicit ``X_val``/``y_val`` in :meth:`fit`, a stratified
    ``validation_fraction`` of the data is held out for margin selection.

    Attributes after fit: ``model_``, ``trace_``, ``selected_alpha_``,
    ``counterfactuals_``, ``classes_``.
    """

    def __init__(self, treatment_index=0, K=10, validation_fraction=0.25, loss="logistic",
                 C=1.0, l2_lambda=None, learning_rate=0.1, max_epochs=500, tol=1e-7,
                 random_state=0):
        self.treatment_index = treatment_index
        self.K = K
        self.validation_fraction = validation_fraction
        self.loss = loss
        self.C = C
        self.l2_lambda = l2_lambda
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.tol = tol
        self.random_state = random_state

    def _dataset(self, X, y):
        return Dataset.from_arrays(X, (y == self.classes_[1]).astype(np.int8), self.treatment_index)

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise SingleClassTraining(f"need exactly 2 classes, got {len(self.classes_)}")
        if X_val is None:
            X, X_val, y, y_val = train_test_split(
                X, y, test_size=self.validation_fraction, stratify=y,
                random_state=self.random_state)
        else:
            X_val, y_val = check_X_y(X_val, y_val)
        cfg = TrainConfig(self.loss, self.l2_lambda, self.C, self.learning_rate,
                          self.max_epochs, self.tol, self.random_state or 0)
        tr = self._dataset(X, y)
        self.counterfactuals_ = build_counterfactual_set(tr)
        self.model_, self.trace_ = run_ccral(tr, self._dataset(X_val, y_val), cfg,
                                             make_margin_grid(self.K), self.counterfactuals_)
        self.selected_alpha_ = self.trace_.selected_alpha
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return decision_function(self.model_, check_array(X))

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = predict_score(self.model_, check_array(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.predict_proba(X)[:, 1] >= 0.5).astype(int)]

