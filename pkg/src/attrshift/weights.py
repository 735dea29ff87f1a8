"""Instance weights from an attribute prior, without target samples.

The weight of a source point ``x`` is

    w(x) = sum_z p(T|z) p(z|x) / sum_z p(S|z) p(z|x)

where ``p(T|z) = pt[z] / (ps[z] + pt[z])`` follows from the two attribute
priors under a uniform domain prior, and ``p(z|x)`` is estimated by the
attribute proportions among the k nearest source samples.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_labels, check_prior
from .core import empirical_attribute_prior
from .neighbors import kneighbors


class WeightEstimationError(ValueError):
    pass


def domain_posterior(prior_source, prior_target):
    """Probability of the target domain given each attribute class.

    Attribute classes absent from both domains get 0.5. The source-domain
    posterior is ``1 - domain_posterior(...)``.
    """
    ps = check_prior(prior_source, name="prior_source")
    pt = check_prior(prior_target, len(ps), name="prior_target")
    total = ps + pt
    out = np.full_like(ps, 0.5)
    nz = total > 0
    out[nz] = pt[nz] / total[nz]
    return out


def default_n_neighbors(n_samples):
    return max(1, math.ceil(math.sqrt(n_samples)))


def _check_finite_ratio(ps, pt):
    bad = np.flatnonzero((ps == 0) & (pt > 0))
    if bad.size:
        raise WeightEstimationError(
            f"attribute classes {bad.tolist()} have zero source prior but positive target "
            "prior; the importance weight would be infinite")


class KnnAttributePosterior(BaseEstimator):
    """k-NN estimate of ``p(z|x)`` from attribute-labelled reference data.

    Parameters
    ----------
    n_neighbors : int, optional
        Defaults to ``ceil(sqrt(n_reference))``.
    leave_one_out : bool, default=True
        When evaluating the reference points themselves (``predict_proba()``
        with no argument), skip each point's own entry.
    algorithm : {"brute", "kd_tree"}, default="brute"
    """

    def __init__(self, n_neighbors=None, leave_one_out=True, algorithm="brute"):
        self.n_neighbors = n_neighbors
        self.leave_one_out = leave_one_out
        self.algorithm = algorithm

    def fit(self, X, z, n_attributes=None):
        X = check_features(X)
        if X.shape[0] == 0:
            raise ValueError("reference set is empty")
        if n_attributes is None:
            n_attributes = int(np.max(z)) + 1
        self.z_ = check_labels(z, n_attributes, name="attributes")
        if self.z_.shape[0] != X.shape[0]:
            raise ValueError("X and z have different lengths")
        self.X_ = X
        self.n_attributes_ = int(n_attributes)
        k = default_n_neighbors(X.shape[0]) if self.n_neighbors is None else int(self.n_neighbors)
        limit = X.shape[0] - (1 if self.leave_one_out else 0)
        if not 1 <= k <= limit:
            raise ValueError(f"n_neighbors={k} out of range [1, {limit}]")
        self.k_ = k
        return self

    def _proportions(self, idx):
        counts = np.zeros((idx.shape[0], self.n_attributes_))
        np.add.at(counts, (np.repeat(np.arange(idx.shape[0]), idx.shape[1]), self.z_[idx].ravel()), 1.0)
        return counts / idx.shape[1]

    def predict_proba(self, X=None):
        """Attribute proportions among the nearest reference samples.

        With ``X=None`` the reference points are queried, leaving each one
        out when ``leave_one_out`` is set. External queries never exclude.
        """
        check_is_fitted(self)
        if X is None:
            exclude = np.arange(self.X_.shape[0]) if self.leave_one_out else None
            idx = kneighbors(self.X_, self.X_, self.k_, exclude=exclude, algorithm=self.algorithm)
        else:
            Q = check_features(X, self.X_.shape[1], name="query")
            k = min(self.k_, self.X_.shape[0])
            idx = kneighbors(self.X_, Q, k, algorithm=self.algorithm)
        return self._proportions(idx)


def knn_attribute_posterior(estimator, query):
    """Posterior over attribute classes for a single feature vector."""
    return estimator.predict_proba(np.atleast_2d(np.asarray(query, dtype=float)))[0]


def _weights_from_posterior(posterior, ps, pt):
    to_target = domain_posterior(ps, pt)
    to_source = 1.0 - to_target
    num = posterior @ to_target
    den = posterior @ to_source
    zero = np.flatnonzero(den <= 0)
    if zero.size:
        i = int(zero[0])
        classes = np.flatnonzero(posterior[i] > 0).tolist()
        raise WeightEstimationError(
            f"sample {i}: zero denominator; its posterior supports attribute classes "
            f"{classes}, all with p(d=S|z)=0")
    return num / den


class AttributeWeightEstimator(BaseEstimator):
    """Zero-shot importance weights from source data and a target attribute prior.

    Parameters
    ----------
    prior_target : array-like of shape (n_attributes,)
        Attribute prior of the target domain.
    prior_source : array-like of shape (n_attributes,), optional
        Attribute prior of the source domain. Estimated from the attribute
        frequencies of the training data when omitted.
    n_neighbors : int, optional
        k for the k-NN posterior, ``ceil(sqrt(n))`` by default.
    leave_one_out : bool, default=True
    normalize : bool, default=False
        Rescale the training weights to mean one.
    algorithm : {"brute", "kd_tree"}, default="brute"

    Attributes
    ----------
    weights_ : ndarray of shape (n_samples,)
        Weights of the training samples.
    posterior_ : ndarray of shape (n_samples, n_attributes)
        Leave-one-out k-NN attribute posterior of the training samples.
    domain_posterior_ : ndarray of shape (n_attributes,)
        ``p(d=T|z)`` per attribute class.
    """

    def __init__(self, prior_target, prior_source=None, n_neighbors=None, leave_one_out=True,
                 normalize=False, algorithm="brute"):
        self.prior_target = prior_target
        self.prior_source = prior_source
        self.n_neighbors = n_neighbors
        self.leave_one_out = leave_one_out
        self.normalize = normalize
        self.algorithm = algorithm

    def fit(self, X, z):
        pt = check_prior(self.prior_target, name="prior_target")
        X = check_features(X)
        z = check_labels(z, len(pt), name="attributes")
        if self.prior_source is None:
            counts = np.bincount(z, minlength=len(pt))
            ps = counts / counts.sum()
        else:
            ps = check_prior(self.prior_source, len(pt), name="prior_source")
        _check_finite_ratio(ps, pt)
        self.prior_source_ = ps
        self.prior_target_ = pt
        self.domain_posterior_ = domain_posterior(ps, pt)
        self.posterior_estimator_ = KnnAttributePosterior(
            self.n_neighbors, self.leave_one_out, self.algorithm).fit(X, z, n_attributes=len(pt))
        self.posterior_ = self.posterior_estimator_.predict_proba()
        w = _weights_from_posterior(self.posterior_, ps, pt)
        self.scale_ = 1.0 / w.mean() if self.normalize and w.mean() > 0 else 1.0
        self.weights_ = w * self.scale_
        return self

    def predict(self, X):
        """Weights at arbitrary query points (no leave-one-out)."""
        check_is_fitted(self)
        P = self.posterior_estimator_.predict_proba(X)
        return _weights_from_posterior(P, self.prior_source_, self.prior_target_) * self.scale_

    def fit_predict(self, X, z):
        return self.fit(X, z).weights_


class StraightforwardWeightEstimator(BaseEstimator):
    """Ratio of attribute priors at each sample's own recorded attribute."""

    def __init__(self, prior_target, prior_source=None):
        self.prior_target = prior_target
        self.prior_source = prior_source

    def fit(self, X, z):
        pt = check_prior(self.prior_target, name="prior_target")
        z = check_labels(z, len(pt), name="attributes")
        if self.prior_source is None:
            counts = np.bincount(z, minlength=len(pt))
            ps = counts / counts.sum()
        else:
            ps = check_prior(self.prior_source, len(pt), name="prior_source")
        bad = np.flatnonzero(ps[z] == 0)
        if bad.size:
            raise WeightEstimationError(
                f"sample {int(bad[0])}: attribute {int(z[bad[0]])} has zero source prior")
        self.prior_source_ = ps
        self.prior_target_ = pt
        self.weights_ = pt[z] / ps[z]
        return self

    def predict(self, z):
        check_is_fitted(self)
        z = check_labels(z, len(self.prior_target_), name="attributes")
        return self.prior_target_[z] / self.prior_source_[z]


def _priors(source, prior_source, prior_target):
    if len(source) == 0:
        raise WeightEstimationError("source dataset is empty")
    if prior_source is None:
        prior_source = empirical_attribute_prior(source)
    ps = check_prior(prior_source, source.num_attributes, name="prior_source")
    pt = check_prior(prior_target, source.num_attributes, name="prior_target")
    return ps, pt


def estimate_weights(source, prior_source, prior_target, k=None, *, leave_one_out=True,
                     normalize=False, algorithm="brute"):
    """Attribute-based weights for every sample of a source :class:`Dataset`."""
    ps, pt = _priors(source, prior_source, prior_target)
    est = AttributeWeightEstimator(pt, ps, n_neighbors=k, leave_one_out=leave_one_out,
                                   normalize=normalize, algorithm=algorithm)
    return est.fit(source.X, source.z).weights_


def straightforward_weights(source, prior_source, prior_target):
    ps, pt = _priors(source, prior_source, prior_target)
    return StraightforwardWeightEstimator(pt, ps).fit(source.X, source.z).weights_
