"""Evaluation metrics and the latent-prior-change diagnostic."""

import numpy as np
from sklearn.metrics import roc_auc_score
from sklearn.model_selection import StratifiedKFold

from ._validation import check_weights
from .weights import KnnAttributePosterior, default_n_neighbors


def weight_rmse(estimated, truth):
    """Root mean squared difference of two aligned weight vectors."""
    a = np.asarray(estimated, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    check_weights(a)
    check_weights(b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def accuracy(model, dataset):
    if len(dataset) == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    return float(np.mean(model.predict(dataset.X) == dataset.y))


def domain_auc(X_source, X_target, n_neighbors=None, folds=2, seed=0):
    """Cross-validated AUC of a k-NN classifier separating two samples.

    Folds are stratified by domain. Each held-out point is scored by the
    fraction of target samples among its k nearest training-fold points.
    """
    X = np.vstack([X_source, X_target])
    d = np.r_[np.zeros(len(X_source), dtype=np.int64), np.ones(len(X_target), dtype=np.int64)]
    scores = np.empty(len(d))
    cv = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    for tr, te in cv.split(X, d):
        k = default_n_neighbors(len(tr)) if n_neighbors is None else min(n_neighbors, len(tr))
        clf = KnnAttributePosterior(k, leave_one_out=False).fit(X[tr], d[tr], n_attributes=2)
        scores[te] = clf.predict_proba(X[te])[:, 1]
    return float(roc_auc_score(d, scores))


def assumption_diagnostic(source, target, n_neighbors=None, folds=2, seed=0):
    """Per-attribute-class check that ``p(x|z)`` is shared by the domains.

    For every attribute class a k-NN domain classifier is cross-validated on
    the pooled class-``z`` samples of both datasets. An AUC near 0.5 supports
    the assumption; values near 1 flag a shift within the class.

    Returns
    -------
    auc : ndarray of shape (num_attributes,)
        NaN where a class has fewer than ``folds`` samples in either domain.
    """
    if source.num_attributes != target.num_attributes:
        raise ValueError("source and target must share the attribute set")
    if source.dim != target.dim:
        raise ValueError("source and target must share the feature dimension")
    out = np.full(source.num_attributes, np.nan)
    for z in range(source.num_attributes):
        Xs = source.X[source.z == z]
        Xt = target.X[target.z == z]
        if min(len(Xs), len(Xt)) < folds:
            continue
        out[z] = domain_auc(Xs, Xt, n_neighbors, folds, seed)
    return out
