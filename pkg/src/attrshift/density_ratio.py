"""Density-ratio baselines: uLSIF from target samples and the analytic oracle."""

import warnings

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features
from .core import SOURCE, TARGET
from .toydata import mixture_logpdf, source_attribute_posterior
from .weights import domain_posterior

SIGMA_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)
LAMBDA_GRID = (1e-3, 1e-2, 1e-1, 1.0)
_MEDIAN_SUBSAMPLE = 1000


class UlsifError(ValueError):
    pass


def median_distance(X, random_state=0):
    """Median pairwise Euclidean distance (on at most 1000 rows)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] > _MEDIAN_SUBSAMPLE:
        idx = check_random_state(random_state).choice(X.shape[0], _MEDIAN_SUBSAMPLE, replace=False)
        X = X[np.sort(idx)]
    diff = X[:, None, :] - X[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d = d[np.triu_indices(X.shape[0], k=1)]
    med = float(np.median(d)) if d.size else 1.0
    return med if med > 0 else 1.0


def gaussian_design(X, centers, sigma):
    """Basis matrix ``exp(-|x - c|^2 / (2 sigma^2))`` of shape (n, b)."""
    diff = X[:, None, :] - centers[None, :, :]
    return np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / (2.0 * sigma ** 2))


def _solve(A, rhs, lam):
    try:
        sol = cho_solve(cho_factor(A, lower=True, check_finite=False), rhs, check_finite=False)
    except LinAlgError:
        sol = lstsq(A, rhs)[0]
    if not np.all(np.isfinite(sol)):
        raise UlsifError(f"singular uLSIF system for lambda={lam!r}")
    return sol


def loocv_score(phi_de, phi_nu, lam):
    """Closed-form leave-one-out squared-loss score of uLSIF.

    ``phi_de`` (n_de, b) and ``phi_nu`` (n_nu, b) are basis values at the
    denominator (source) and numerator (target) samples. The first
    ``min(n_de, n_nu)`` rows of each are held out in pairs.
    """
    n_de, b = phi_de.shape
    n_nu = phi_nu.shape[0]
    n = min(n_de, n_nu)
    if n < 2:
        raise UlsifError("leave-one-out cross-validation needs at least two samples per domain")
    H = phi_de.T @ phi_de / n_de
    h = phi_nu.mean(axis=0)
    Xde = phi_de[:n].T
    Xnu = phi_nu[:n].T
    B = H + lam * (n_de - 1) / n_de * np.eye(b)
    B_inv_Xde = _solve(B, Xde, lam)
    B_inv_h = _solve(B, h, lam)
    B_inv_Xnu = _solve(B, Xnu, lam)
    denom = n_de - np.sum(Xde * B_inv_Xde, axis=0)
    B0 = B_inv_h[:, None] + B_inv_Xde * ((h @ B_inv_Xde) / denom)[None, :]
    B1 = B_inv_Xnu + B_inv_Xde * (np.sum(Xnu * B_inv_Xde, axis=0) / denom)[None, :]
    B2 = np.maximum(0.0, (n_de - 1) / (n_de * (n_nu - 1)) * (n_nu * B0 - B1))
    r_de = np.sum(Xde * B2, axis=0)
    r_nu = np.sum(Xnu * B2, axis=0)
    return float(r_de @ r_de / (2.0 * n) - r_nu.sum() / n)


class ULSIF(BaseEstimator):
    """Unconstrained least-squares importance fitting.

    Models ``p_target(x) / p_source(x)`` as a nonnegative combination of
    Gaussian bumps centred on target samples. Width and ridge strength are
    selected by the analytic leave-one-out score.

    Parameters
    ----------
    num_basis : int, default=100
        Maximum number of basis centres (capped by the number of target
        samples).
    sigma_grid : sequence of float, optional
        Candidate kernel widths. Defaults to the median pairwise distance of
        the pooled data times ``(0.25, 0.5, 1, 2, 4)``.
    lambda_grid : sequence of float, default=(1e-3, 1e-2, 1e-1, 1)
    random_state : int, default=0
        Seed of the shuffle that picks the centres.

    Attributes
    ----------
    centers_, alphas_, sigma_, lambda_ : fitted model
    cv_scores_ : ndarray of shape (len(sigma_grid), len(lambda_grid))
    """

    def __init__(self, num_basis=100, sigma_grid=None, lambda_grid=LAMBDA_GRID, random_state=0):
        self.num_basis = num_basis
        self.sigma_grid = sigma_grid
        self.lambda_grid = lambda_grid
        self.random_state = random_state

    def fit(self, X_source, X_target):
        Xs = check_features(X_source, name="X_source")
        Xt = check_features(X_target, Xs.shape[1], name="X_target")
        if Xs.shape[0] == 0 or Xt.shape[0] == 0:
            raise UlsifError("source and target samples must be non-empty")
        if self.num_basis < 1:
            raise UlsifError("num_basis must be positive")
        if self.sigma_grid is None:
            med = median_distance(np.vstack([Xs, Xt]), self.random_state)
            sigmas = [med * f for f in SIGMA_FACTORS]
        else:
            sigmas = [float(s) for s in self.sigma_grid]
        lambdas = [float(v) for v in self.lambda_grid]
        if not sigmas or not lambdas:
            raise UlsifError("sigma_grid and lambda_grid must be non-empty")
        if min(sigmas) <= 0 or min(lambdas) <= 0:
            raise UlsifError("grid values must be positive")

        rng = check_random_state(self.random_state)
        b = min(int(self.num_basis), Xt.shape[0])
        centers = Xt[rng.permutation(Xt.shape[0])[:b]]

        scores = np.full((len(sigmas), len(lambdas)), np.nan)
        if min(Xs.shape[0], Xt.shape[0]) >= 2:
            for i, s in enumerate(sigmas):
                phi_de = gaussian_design(Xs, centers, s)
                phi_nu = gaussian_design(Xt, centers, s)
                for j, lam in enumerate(lambdas):
                    scores[i, j] = loocv_score(phi_de, phi_nu, lam)
            i, j = np.unravel_index(np.argmin(scores), scores.shape)
        elif scores.size == 1:
            i = j = 0
        else:
            raise UlsifError("hyperparameter selection needs at least two samples per domain")

        sigma, lam = sigmas[i], lambdas[j]
        phi_de = gaussian_design(Xs, centers, sigma)
        H = phi_de.T @ phi_de / Xs.shape[0]
        h = gaussian_design(Xt, centers, sigma).mean(axis=0)
        alphas = _solve(H + lam * np.eye(b), h, lam)

        self.centers_ = centers
        self.alphas_ = np.maximum(alphas, 0.0)
        self.sigma_ = sigma
        self.lambda_ = lam
        self.sigma_grid_ = np.array(sigmas)
        self.lambda_grid_ = np.array(lambdas)
        self.cv_scores_ = scores
        return self

    def predict(self, X):
        """Estimated density ratio at ``X`` (nonnegative)."""
        check_is_fitted(self)
        X = check_features(X, self.centers_.shape[1])
        return np.maximum(gaussian_design(X, self.centers_, self.sigma_) @ self.alphas_, 0.0)


def fit_ulsif(source, target, num_basis=100, sigma_grid=None, lambda_grid=LAMBDA_GRID, seed=0):
    """Fit :class:`ULSIF` on the features of two :class:`Dataset` objects."""
    if source.dim != target.dim:
        raise UlsifError(f"dimension mismatch: source {source.dim}, target {target.dim}")
    return ULSIF(num_basis, sigma_grid, lambda_grid, seed).fit(source.X, target.X)


def predict_ulsif(model, query):
    return float(model.predict(np.atleast_2d(np.asarray(query, dtype=float)))[0])


def ground_truth_weights(spec, queries):
    """Exact ratio ``p(x|T) / p(x|S)`` of a synthetic spec.

    Only the mixture coordinate enters; the uniform factor of the 2-D toy
    problem cancels, including outside its support.
    """
    X = check_features(queries, spec.dim, name="queries")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        log_t = mixture_logpdf(spec, TARGET, X)
        log_s = mixture_logpdf(spec, SOURCE, X)
    return np.exp(log_t - log_s)


def oracle_attribute_weights(spec, queries):
    """Attribute weights computed with the exact source posterior ``p(z|x, S)``.

    This is what the k-NN weight estimator converges to; it differs from
    :func:`ground_truth_weights` whenever attribute classes overlap.
    """
    post = source_attribute_posterior(spec, queries)
    to_target = domain_posterior(spec.mixing(SOURCE), spec.mixing(TARGET))
    return (post @ to_target) / (post @ (1.0 - to_target))
