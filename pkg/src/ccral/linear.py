"""Linear probabilistic classifier trained by full-batch gradient descent.

Scores are ``sigmoid(w.x + b)`` for both loss kinds; for the hinge loss the
sigmoid is only a monotone squashing of the margin, not a calibration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DimensionMismatch, DivergedLoss, SingleClassTraining

LOSS_KINDS = ("logistic", "hinge")
MIN_LEARNING_RATE = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """Training hyper-parameters.

    ``l2_lambda=None`` means "derive from C": ``1 / (C * n_rows)`` at fit time,
    the usual mapping from an SVM-style C to an averaged-loss penalty.
    """

    loss_kind: str = "logistic"
    l2_lambda: float | None = None
    C: float = 1.0
    learning_rate: float = 0.1
    max_epochs: int = 500
    tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.l2_lambda is not None and self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.learning_rate <= 0 or self.tol <= 0 or self.max_epochs < 1:
            raise ValueError("learning_rate and tol must be > 0, max_epochs >= 1")

    def effective_lambda(self, n_rows):
        if self.l2_lambda is not None:
            return float(self.l2_lambda)
        return 1.0 / (self.C * n_rows)

    def to_dict(self):
        return {
            "loss_kind": self.loss_kind,
            "l2_lambda": self.l2_lambda,
            "C": self.C,
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    loss_kind: str = "logistic"
    trained_on: int = 0
    n_epochs: int = 0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise DivergedLoss("model parameters are not finite")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def d(self):
        return self.weights.shape[0]

    def identical_to(self, other: "LinearModel") -> bool:
        """Bitwise equality of parameters and loss kind."""
        return (
            self.loss_kind == other.loss_kind
            and self.weights.shape == other.weights.shape
            and self.weights.tobytes() == other.weights.tobytes()
            and np.float64(self.bias).tobytes() == np.float64(other.bias).tobytes()
        )

    def to_dict(self):
        return {
            "loss_kind": self.loss_kind,
            "weights": [float(v) for v in self.weights],
            "bias": self.bias,
            "trained_on": self.trained_on,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["weights"], dtype=float), float(doc["bias"]),
                   doc.get("loss_kind", "logistic"), int(doc.get("trained_on", 0)))


def save_model(model: LinearModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model(path) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        return LinearModel.from_dict(json.load(fh))


def _objective(theta, X, y, lam, loss_kind):
    with np.errstate(over="ignore", invalid="ignore"):
        return _objective_raw(theta, X, y, lam, loss_kind)


def _objective_raw(theta, X, y, lam, loss_kind):
    # overflow surfaces as a non-finite loss, which the trainer reports
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    n = X.shape[0]
    if loss_kind == "logistic":
        loss = np.mean(np.logaddexp(0.0, z) - y * z)
        r = expit(z) - y
        gw = X.T @ r / n
        gb = r.mean()
    else:
        s = 2.0 * y - 1.0
        margin = s * z
        loss = np.mean(np.maximum(0.0, 1.0 - margin))
        r = np.where(margin < 1.0, -s, 0.0)
        gw = X.T @ r / n
        gb = r.mean()
    loss += 0.5 * lam * float(w @ w)
    return float(loss), np.append(gw + lam * w, gb)


def _check_dim(model, X):
    if X.shape[-1] != model.d:
        raise DimensionMismatch(f"expected {model.d} features, got {X.shape[-1]}")


def loss_and_gradient(m: LinearModel, ds, l2_lambda):
    """Average loss plus ``l2_lambda/2 * ||w||^2`` and its gradient over (w, b).

    The bias is not regularized. ``ds`` is a Dataset or an ``(X, y)`` pair.
    """
    X, y = (ds.X, ds.y) if hasattr(ds, "X") else ds
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    _check_dim(m, X)
    theta = np.append(m.weights, m.bias)
    return _objective(theta, X, np.asarray(y, dtype=float), l2_lambda, m.loss_kind)


def fit_arrays(X, y, cfg: TrainConfig) -> LinearModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n == 0:
        raise ValueError("empty training set")
    if len(np.unique(y)) < 2:
        raise SingleClassTraining("training labels contain a single class")
    lam = cfg.effective_lambda(n)

    theta = np.zeros(d + 1)
    loss, grad = _objective(theta, X, y, lam, cfg.loss_kind)
    if not np.isfinite(loss):
        raise DivergedLoss("initial loss is not finite")
    lr = cfg.learning_rate
    epochs = 0
    while epochs < cfg.max_epochs:
        epochs += 1
        cand = theta - lr * grad
        new_loss, new_grad = _objective(cand, X, y, lam, cfg.loss_kind)
        if not np.isfinite(new_loss):
            raise DivergedLoss(f"non-finite loss at epoch {epochs}")
        if new_loss > loss:
            # keep the loss sequence non-increasing: reject the step, halve the rate
            lr *= 0.5
            if lr < MIN_LEARNING_RATE:
                break
            continue
        improvement = loss - new_loss
        theta, loss, grad = cand, new_loss, new_grad
        if improvement < cfg.tol:
            break
    return LinearModel(theta[:-1].copy(), float(theta[-1]), cfg.loss_kind, n, epochs)


def train(ds, cfg: TrainConfig) -> LinearModel:
    """Fit from zero initialization; identical (ds, cfg) give bitwise-identical models."""
    return fit_arrays(ds.X, ds.y, cfg)


def decision_function(m: LinearModel, X):
    X = np.asarray(X, dtype=float)
    _check_dim(m, X)
    return X @ m.weights + m.bias


def predict_score(m: LinearModel, x):
    """Score in [0, 1] for one vector (returns float) or a matrix of rows."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    s = expit(decision_function(m, x))
    return float(s) if x.ndim == 1 else s


def predict_label(m: LinearModel, x):
    s = predict_score(m, x)
    if np.ndim(s) == 0:
        return int(s >= 0.5)
    return (s >= 0.5).astype(np.int8)


class LinearClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn estimator over :func:`fit_arrays`.

    Parameters mirror :class:`TrainConfig`; ``loss`` is ``"logistic"`` or
    ``"hinge"``. ``predict_proba`` returns the sigmoid score in column 1.
    """

    def __init__(self, loss="logistic", C=1.0, l2_lambda=None, learning_rate=0.1,
                 max_epochs=500, tol=1e-7, random_state=0):
        self.loss = loss
        self.C = C
        self.l2_lambda = l2_lambda
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.tol = tol
        self.random_state = random_state

    def _config(self):
        return TrainConfig(self.loss, self.l2_lambda, self.C, self.learning_rate,
                           self.max_epochs, self.tol, self.random_state or 0)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise SingleClassTraining(f"need exactly 2 classes, got {len(self.classes_)}")
        self.model_ = fit_arrays(X, (y == self.classes_[1]).astype(float), self._config())
        self.coef_ = np.array(self.model_.weights).reshape(1, -1)
        self.intercept_ = np.array([self.model_.bias])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return decision_function(self.model_, check_array(X))

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        p = expit(self.decision_function(X))
        return self.classes_[(p >= 0.5).astype(int)]
