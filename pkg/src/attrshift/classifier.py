"""Weighted kernel logistic regression with cross-validated hyperparameters.

Scores are ``f_c(x) = sum_j alpha_jc k(x, x_j) + b_c`` for classes
``c = 1..C-1`` with class 0 pinned to score zero (plain logistic regression
when ``C == 2``). Training minimises

    sum_i w_i CE_i / sum_i w_i + reg * sum_c ||f_c||_H^2

with a Gaussian kernel ``k(x, x') = exp(-|x - x'|^2 / (2 width^2))``.
Dividing by the weight total makes the objective invariant to rescaling
the weights, and makes doubling a weight identical to duplicating the row.

The kernel matrix of the positive-weight rows is eigendecomposed once. The
model is then fitted by damped Newton steps on ``f = Phi beta`` with
``Phi = U sqrt(S)``, where ``||f||_H^2 = |beta|^2``. Zero-weight rows stay
among the support points with zero coefficient and never enter the fit.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh
from scipy.special import log_softmax, softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_weights
from .density_ratio import median_distance

WIDTH_FACTORS = (0.5, 1.0, 2.0)
REG_GRID = (1e-4, 1e-3, 1e-2, 1e-1)
TIE_RTOL = 1e-12


class TrainingError(ValueError):
    pass


def gaussian_kernel(A, B, width):
    diff = A[:, None, :] - B[None, :, :]
    return np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / (2.0 * width ** 2))


def kernel_features(K, rtol=1e-10):
    """Eigen-features ``Phi`` with ``Phi @ Phi.T ~= K`` and the map to kernel coefficients.

    Returns ``(Phi, to_alpha)`` where ``alpha = to_alpha @ beta`` gives
    kernel expansion coefficients for the function ``Phi @ beta``.
    """
    s, U = eigh(K)
    keep = s > rtol * max(s[-1], 0.0)
    s, U = s[keep], U[:, keep]
    root = np.sqrt(s)
    return U * root, U / root


def _onehot(y, n_classes):
    Y = np.zeros((y.shape[0], n_classes))
    Y[np.arange(y.shape[0]), y] = 1.0
    return Y


def _scores(features, theta, n_classes):
    """Full (n, C) score matrix; ``theta`` packs (r+1, C-1) with the bias last."""
    coef = theta.reshape(features.shape[1] + 1, n_classes - 1)
    F = features @ coef[:-1] + coef[-1]
    return np.column_stack([np.zeros(features.shape[0]), F])


def weighted_objective(theta, features, Y, weights, reg):
    """Normalised weighted cross-entropy plus ridge penalty, with gradient.

    Parameters
    ----------
    theta : ndarray of shape ((r + 1) * (C - 1),)
        Feature coefficients followed by the bias row.
    features : ndarray of shape (n, r)
    Y : ndarray of shape (n, C)
        One-hot labels.
    weights : ndarray of shape (n,)
    reg : float

    Returns
    -------
    value : float
    grad : ndarray like ``theta``
    """
    n_classes = Y.shape[1]
    r = features.shape[1]
    v = weights / weights.sum()
    S = _scores(features, theta, n_classes)
    logp = log_softmax(S, axis=1)
    coef = theta.reshape(r + 1, n_classes - 1)
    beta = coef[:-1]
    value = -np.sum(v * np.sum(Y * logp, axis=1)) + reg * np.sum(beta * beta)
    G = (np.exp(logp) - Y)[:, 1:] * v[:, None]
    grad = np.vstack([features.T @ G + 2.0 * reg * beta, G.sum(axis=0)])
    return value, grad.ravel()


def _hessian(theta, features, Y, weights, reg):
    n_classes = Y.shape[1]
    r = features.shape[1]
    c1 = n_classes - 1
    v = weights / weights.sum()
    P = softmax(_scores(features, theta, n_classes), axis=1)[:, 1:]
    A = np.column_stack([features, np.ones(features.shape[0])])
    if c1 == 1:
        d = v * P[:, 0] * (1.0 - P[:, 0])
        H = (A * d[:, None]).T @ A
    else:
        # M_i[c, c'] = p_c (delta_cc' - p_c')
        M = -P[:, :, None] * P[:, None, :]
        idx = np.arange(c1)
        M[:, idx, idx] += P
        H = np.einsum("i,ia,ib,icd->acbd", v, A, A, M).reshape((r + 1) * c1, (r + 1) * c1)
    pen = np.zeros((r + 1, c1))
    pen[:-1] = 2.0 * reg
    H[np.diag_indices_from(H)] += pen.ravel()
    return H


def _newton(features, Y, weights, reg, tol, max_iter):
    theta = np.zeros((features.shape[1] + 1) * (Y.shape[1] - 1))
    value, grad = weighted_objective(theta, features, Y, weights, reg)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if np.linalg.norm(grad) <= tol:
            n_iter -= 1
            break
        H = _hessian(theta, features, Y, weights, reg)
        try:
            step = cho_solve(cho_factor(H, check_finite=False), grad, check_finite=False)
        except LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        slope = grad @ step
        while True:
            cand = theta - t * step
            cval, cgrad = weighted_objective(cand, features, Y, weights, reg)
            if cval <= value - 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        converged = value - cval <= 1e-16 * max(1.0, abs(value))
        theta, value, grad = cand, cval, cgrad
        if converged and np.linalg.norm(grad) <= 1e3 * tol:
            break
    return theta, value, float(np.linalg.norm(grad)), n_iter


class WeightedKernelLogisticRegression(ClassifierMixin, BaseEstimator):
    """Gaussian-kernel logistic regression trained on instance-weighted data.

    Parameters
    ----------
    kernel_width : float, default=1.0
    regularization : float, default=1e-3
        Coefficient of the squared RKHS norm.
    n_classes : int, optional
        Number of classes; defaults to ``max(y) + 1``. Labels must already be
        indices ``0..n_classes-1``.
    tol : float, default=1e-6
        Gradient-norm stopping threshold.
    max_iter : int, default=100

    Attributes
    ----------
    support_points_ : ndarray of shape (n, m)
    coefficients_ : ndarray of shape (n, n_classes - 1)
    bias_ : ndarray of shape (n_classes - 1,)
    classes_ : ndarray
    objective_ : float
        Training objective at the solution.
    """

    def __init__(self, kernel_width=1.0, regularization=1e-3, n_classes=None, tol=1e-6,
                 max_iter=100):
        self.kernel_width = kernel_width
        self.regularization = regularization
        self.n_classes = n_classes
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, sample_weight=None):
        X = check_features(X)
        y = np.asarray(y, dtype=np.int64)
        w = np.ones(X.shape[0]) if sample_weight is None else check_weights(sample_weight, X.shape[0])
        n_classes = int(self.n_classes or y.max() + 1)
        if n_classes < 2:
            raise TrainingError("need at least two classes")
        if y.min() < 0 or y.max() >= n_classes:
            raise TrainingError(f"labels must lie in [0, {n_classes - 1}]")
        pos = w > 0
        if not pos.any():
            raise TrainingError("all sample weights are zero")
        K = gaussian_kernel(X[pos], X[pos], self.kernel_width)
        self._fit_decomposed(X, y, w, n_classes, kernel_features(K))
        return self

    def _fit_decomposed(self, X, y, w, n_classes, decomposition):
        features, to_alpha = decomposition
        pos = w > 0
        Y = _onehot(y[pos], n_classes)
        theta, value, gnorm, n_iter = _newton(features, Y, w[pos], self.regularization,
                                              self.tol, self.max_iter)
        coef = theta.reshape(features.shape[1] + 1, n_classes - 1)
        alpha = np.zeros((X.shape[0], n_classes - 1))
        alpha[pos] = to_alpha @ coef[:-1]
        self.support_points_ = X
        self.coefficients_ = alpha
        self.bias_ = coef[-1].copy()
        self.classes_ = np.arange(n_classes)
        self.objective_ = float(value)
        self.grad_norm_ = gnorm
        self.n_iter_ = n_iter
        return self

    @property
    def num_classes(self):
        return len(self.classes_)

    def class_scores(self, X):
        """Scores of shape (n, n_classes); class 0 is the zero reference."""
        check_is_fitted(self)
        X = check_features(X, self.support_points_.shape[1])
        K = gaussian_kernel(X, self.support_points_, self.kernel_width)
        F = K @ self.coefficients_ + self.bias_
        return np.column_stack([np.zeros(X.shape[0]), F])

    def decision_function(self, X):
        S = self.class_scores(X)
        return S[:, 1] if S.shape[1] == 2 else S

    def predict_proba(self, X):
        return softmax(self.class_scores(X), axis=1)

    def predict(self, X):
        """Class with the highest score; near-equal scores go to the lowest index."""
        S = self.class_scores(X)
        best = S.max(axis=1, keepdims=True)
        tied = S >= best - TIE_RTOL * np.maximum(1.0, np.abs(best))
        return np.argmax(tied, axis=1)

    def per_sample_loss(self, X, y):
        logp = log_softmax(self.class_scores(X), axis=1)
        y = np.asarray(y, dtype=np.int64)
        return -logp[np.arange(len(y)), y]

    def to_dict(self):
        check_is_fitted(self)
        return {
            "kernel_width": float(self.kernel_width),
            "regularization": float(self.regularization),
            "bias": self.bias_.tolist(),
            "coefficients": self.coefficients_.tolist(),
            "support_points": self.support_points_.tolist(),
            "num_classes": int(self.num_classes),
        }

    @classmethod
    def from_dict(cls, d):
        model = cls(kernel_width=d["kernel_width"], regularization=d["regularization"],
                    n_classes=d["num_classes"])
        model.support_points_ = np.asarray(d["support_points"], dtype=float)
        c1 = int(d["num_classes"]) - 1
        model.coefficients_ = np.asarray(d["coefficients"], dtype=float).reshape(-1, c1)
        model.bias_ = np.asarray(d["bias"], dtype=float).reshape(c1)
        model.classes_ = np.arange(int(d["num_classes"]))
        return model


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return WeightedKernelLogisticRegression.from_dict(json.load(fh))


@dataclass(frozen=True)
class CvGrid:
    """Cross-validation grid. Empty ``widths`` means median-heuristic defaults."""

    widths: tuple = ()
    regs: tuple = REG_GRID
    folds: int = 5
    width_factors: tuple = field(default=WIDTH_FACTORS)

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(float(v) for v in self.widths))
        object.__setattr__(self, "regs", tuple(float(v) for v in self.regs))
        if not self.regs or (not self.widths and not self.width_factors):
            raise ValueError("CV grid must be non-empty")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if min(self.regs) <= 0 or (self.widths and min(self.widths) <= 0):
            raise ValueError("grid values must be positive")

    def resolve_widths(self, X):
        if self.widths:
            return list(self.widths)
        med = median_distance(X)
        return [med * f for f in self.width_factors]


class KernelLogisticCV(ClassifierMixin, BaseEstimator):
    """Select width and regularisation by weighted k-fold CV accuracy, then refit.

    Only positive-weight samples are assigned to folds, so zero-weight rows
    influence neither the fits nor the scores. Ties go to the larger
    regularisation, then the larger width.
    """

    def __init__(self, grid=None, n_classes=None, random_state=0, tol=1e-6, max_iter=100):
        self.grid = grid
        self.n_classes = n_classes
        self.random_state = random_state
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, sample_weight=None):
        grid = self.grid or CvGrid()
        X = check_features(X)
        y = np.asarray(y, dtype=np.int64)
        w = np.ones(X.shape[0]) if sample_weight is None else check_weights(sample_weight, X.shape[0])
        n_classes = int(self.n_classes or y.max() + 1)
        pos_idx = np.flatnonzero(w > 0)
        if pos_idx.size == 0:
            raise TrainingError("all sample weights are zero")
        if pos_idx.size < grid.folds:
            raise TrainingError(f"{pos_idx.size} positive-weight samples cannot fill {grid.folds} folds")
        widths = grid.resolve_widths(X[pos_idx])
        regs = list(grid.regs)

        perm = check_random_state(self.random_state).permutation(pos_idx.size)
        fold_of = np.empty(pos_idx.size, dtype=np.int64)
        fold_of[perm] = np.arange(pos_idx.size) % grid.folds

        Xp, yp, wp = X[pos_idx], y[pos_idx], w[pos_idx]
        correct = np.zeros((len(widths), len(regs)))
        total = 0.0
        for f in range(grid.folds):
            tr, va = fold_of != f, fold_of == f
            missing = np.setdiff1d(np.arange(n_classes), yp[tr])
            if missing.size:
                raise TrainingError(
                    f"classes {missing.tolist()} absent from CV training fold {f}; "
                    "reduce the number of folds")
            total += wp[va].sum()
            for i, width in enumerate(widths):
                Ktr = gaussian_kernel(Xp[tr], Xp[tr], width)
                dec = kernel_features(Ktr)
                Kva = gaussian_kernel(Xp[va], Xp[tr], width)
                for j, reg in enumerate(regs):
                    model = WeightedKernelLogisticRegression(width, reg, n_classes, self.tol,
                                                             self.max_iter)
                    model._fit_decomposed(Xp[tr], yp[tr], wp[tr], n_classes, dec)
                    S = Kva @ model.coefficients_ + model.bias_
                    S = np.column_stack([np.zeros(S.shape[0]), S])
                    best = S.max(axis=1, keepdims=True)
                    pred = np.argmax(S >= best - TIE_RTOL * np.maximum(1.0, np.abs(best)), axis=1)
                    correct[i, j] += wp[va][pred == yp[va]].sum()
        scores = correct / total

        best = None
        for i, width in enumerate(widths):
            for j, reg in enumerate(regs):
                key = (scores[i, j], reg, width)
                if best is None or key > best[0]:
                    best = (key, i, j)
        _, i, j = best
        self.cv_scores_ = scores
        self.widths_ = np.array(widths)
        self.regs_ = np.array(regs)
        self.best_width_ = widths[i]
        self.best_reg_ = regs[j]
        self.best_estimator_ = WeightedKernelLogisticRegression(
            widths[i], regs[j], n_classes, self.tol, self.max_iter).fit(X, y, w)
        self.classes_ = self.best_estimator_.classes_
        return self

    def predict(self, X):
        check_is_fitted(self)
        return self.best_estimator_.predict(X)

    def predict_proba(self, X):
        check_is_fitted(self)
        return self.best_estimator_.predict_proba(X)

    def decision_function(self, X):
        check_is_fitted(self)
        return self.best_estimator_.decision_function(X)


def train_weighted(dataset, weights=None, grid=None, seed=0):
    """Cross-validated weighted training on a :class:`Dataset`; returns the refit model."""
    if len(dataset) == 0:
        raise TrainingError("training dataset is empty")
    w = np.ones(len(dataset)) if weights is None else check_weights(weights, len(dataset))
    cv = KernelLogisticCV(grid, dataset.num_classes, seed).fit(dataset.X, dataset.y, w)
    model = cv.best_estimator_
    model.cv_ = cv
    return model


def predict(model, query):
    return int(model.predict(np.atleast_2d(np.asarray(query, dtype=float)))[0])


def weighted_risk(model, dataset, weights):
    """``(1/n) sum_i w_i CE_i`` of ``model`` on ``dataset``."""
    w = check_weights(weights, len(dataset))
    if len(dataset) == 0:
        return 0.0
    return float(np.sum(w * model.per_sample_loss(dataset.X, dataset.y)) / len(dataset))
