"""Synthetic datasets with known densities.

Two families are provided:

* :class:`ToySpec` -- 2-D binary problem. ``x0`` follows a Gaussian mixture
  whose component index is the attribute, ``x1`` is uniform, and the label
  is drawn from ``p(y=1|x) = sigmoid(gain * (x1 - sin x0))``.
* :class:`OverlapSpec` -- 1-D two-attribute problem with unit-variance
  Gaussians at ``-sep/2`` and ``+sep/2``.

Random numbers come from ``numpy.random.Philox`` keyed by
``SeedSequence([seed, domain_code, family_code])``. Every sample consumes
exactly four uniforms, one Philox counter block, so sample ``i`` depends
only on ``(seed, domain, i)`` and generation could be split by index.
Normals are produced by inverse-CDF, never by rejection.
"""

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit, logsumexp, ndtri

from ._validation import check_features, check_prior
from .core import SOURCE, TARGET, Dataset

PI = math.pi
DEFAULT_CENTROIDS = (-0.75 * PI, -0.5 * PI, 0.0, 0.5 * PI, 0.75 * PI)

_DOMAIN_CODES = {SOURCE: 0, TARGET: 1}
_TOY_FAMILY = 0
_OVERLAP_FAMILY = 1
_HALF_ULP = 2.0 ** -54


def _check_domain(domain):
    if domain not in _DOMAIN_CODES:
        raise ValueError(f"domain must be 'source' or 'target', got {domain!r}")
    return domain


def uniform_stream(seed, domain, family, n, width=4):
    """``(n, width)`` uniforms in the open interval (0, 1).

    Row ``i`` is Philox counter block ``i`` of the stream selected by
    ``(seed, domain, family)``.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _DOMAIN_CODES[domain], family])
    gen = np.random.Generator(np.random.Philox(ss))
    return gen.random((n, width)) + _HALF_ULP


def _draw_categorical(u, probs):
    cum = np.cumsum(probs)
    cum[np.flatnonzero(probs > 0)[-1]:] = np.inf
    return np.searchsorted(cum, u, side="right").astype(np.int64)


def _normal_logpdf(x, mean, sd):
    return -0.5 * ((x - mean) / sd) ** 2 - math.log(sd) - 0.5 * math.log(2 * PI)


@dataclass(frozen=True)
class ToySpec:
    """Generative description of the 2-D Gaussian-mixture toy problem."""

    mixing_source: tuple
    mixing_target: tuple
    centroids: tuple = DEFAULT_CENTROIDS
    sigma_toy: float = 0.2 * PI
    x1_range: tuple = (-2.0, 2.0)
    posterior_gain: float = 5.0
    n_source: int = 600
    n_target: int = 600
    seed: int = 0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        for attr in ("mixing_source", "mixing_target", "centroids", "x1_range"):
            object.__setattr__(self, attr, tuple(float(v) for v in getattr(self, attr)))
        c = np.asarray(self.centroids)
        if c.size == 0 or np.any(np.diff(c) <= 0):
            raise ValueError("centroids must be non-empty and strictly increasing")
        check_prior(self.mixing_source, c.size, name="mixing_source")
        check_prior(self.mixing_target, c.size, name="mixing_target")
        lo, hi = self.x1_range
        if not hi > lo:
            raise ValueError("x1_range must be a non-degenerate interval")
        if not self.sigma_toy > 0 or not self.posterior_gain > 0:
            raise ValueError("sigma_toy and posterior_gain must be positive")
        if self.n_source < 1 or self.n_target < 1:
            raise ValueError("sample counts must be positive")

    num_attributes = property(lambda self: len(self.centroids))
    dim = 2

    def mixing(self, domain):
        return np.asarray(self.mixing_source if _check_domain(domain) == SOURCE
                          else self.mixing_target)

    def n_samples(self, domain):
        return self.n_source if _check_domain(domain) == SOURCE else self.n_target

    def component_logpdf(self, X):
        """Log-density of ``x0`` under each mixture component, shape (n, K)."""
        X = check_features(X, 2)
        return _normal_logpdf(X[:, :1], np.asarray(self.centroids)[None, :], self.sigma_toy)

    def label_posterior(self, X):
        X = check_features(X, 2)
        return expit(self.posterior_gain * (X[:, 1] - np.sin(X[:, 0])))

    def to_dict(self):
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class OverlapSpec:
    """1-D two-attribute Gaussian problem used to contrast weighting schemes."""

    mean_separation: float
    prior_source: tuple = (0.5, 0.5)
    prior_target: tuple = (1.0, 0.0)
    n: int = 2000
    seed: int = 0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        for attr in ("prior_source", "prior_target"):
            p = tuple(float(v) for v in getattr(self, attr))
            if len(p) != 2:
                raise ValueError(f"{attr} must have exactly two entries (K=2), got {len(p)}")
            check_prior(p, 2, name=attr)
            object.__setattr__(self, attr, p)
        if self.n < 1:
            raise ValueError("n must be positive")

    num_attributes = 2
    dim = 1

    @property
    def means(self):
        h = 0.5 * float(self.mean_separation)
        return np.array([-h, h])

    def mixing(self, domain):
        return np.asarray(self.prior_source if _check_domain(domain) == SOURCE
                          else self.prior_target)

    def n_samples(self, domain):
        _check_domain(domain)
        return self.n

    def component_logpdf(self, X):
        X = check_features(X, 1)
        return _normal_logpdf(X[:, :1], self.means[None, :], 1.0)

    def to_dict(self):
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def generate_toy(spec, domain):
    """Draw the source or target sample of a :class:`ToySpec`."""
    n = spec.n_samples(domain)
    u = uniform_stream(spec.seed, domain, _TOY_FAMILY, n)
    z = _draw_categorical(u[:, 0], spec.mixing(domain))
    x0 = np.asarray(spec.centroids)[z] + spec.sigma_toy * ndtri(u[:, 1])
    lo, hi = spec.x1_range
    x1 = lo + (hi - lo) * u[:, 2]
    X = np.column_stack([x0, x1])
    y = (u[:, 3] < spec.label_posterior(X)).astype(np.int64)
    return Dataset(X, y, z, 2, spec.num_attributes, domain)


def generate_overlap_demo(mean_separation, prior_source=(0.5, 0.5), prior_target=(1.0, 0.0),
                          n=2000, seed=0, domain=SOURCE):
    """1-D dataset with attribute-conditional unit Gaussians; labels are all 0."""
    spec = OverlapSpec(mean_separation, tuple(prior_source), tuple(prior_target), n, seed)
    return generate_overlap(spec, domain)


def generate_overlap(spec, domain=SOURCE):
    n = spec.n_samples(domain)
    u = uniform_stream(spec.seed, domain, _OVERLAP_FAMILY, n)
    z = _draw_categorical(u[:, 0], spec.mixing(domain))
    x = spec.means[z] + ndtri(u[:, 1])
    return Dataset(x.reshape(-1, 1), np.zeros(n, dtype=np.int64), z, 1, 2, domain)


def generate(spec, domain):
    if isinstance(spec, ToySpec):
        return generate_toy(spec, domain)
    if isinstance(spec, OverlapSpec):
        return generate_overlap(spec, domain)
    raise TypeError(f"unsupported spec type {type(spec).__name__}")


def mixture_logpdf(spec, domain, X):
    """Log-density of the attribute-informative coordinate under one domain."""
    logf = spec.component_logpdf(X)
    with np.errstate(divide="ignore"):
        logpi = np.log(spec.mixing(domain))
    return logsumexp(logf + logpi[None, :], axis=1)


def true_density(spec, domain, point):
    """Density ``p(x|d)`` of the generative model at one or more points.

    For a :class:`ToySpec` this is the ``x0`` mixture density times the
    uniform density of ``x1`` (zero outside ``x1_range``).
    """
    single = np.ndim(point) == 1
    X = check_features(np.atleast_2d(point), spec.dim, name="point")
    dens = np.exp(mixture_logpdf(spec, domain, X))
    if isinstance(spec, ToySpec):
        lo, hi = spec.x1_range
        inside = (X[:, 1] >= lo) & (X[:, 1] <= hi)
        dens = np.where(inside, dens / (hi - lo), 0.0)
    return float(dens[0]) if single else dens


def source_attribute_posterior(spec, X):
    """Exact ``p(z|x, d=S)`` of the generative model."""
    logf = spec.component_logpdf(X)
    with np.errstate(divide="ignore"):
        logj = logf + np.log(spec.mixing(SOURCE))[None, :]
    return np.exp(logj - logsumexp(logj, axis=1, keepdims=True))


TOY_MIXING = {
    "A": ((0.1, 0.1, 0.2, 0.4, 0.2), (0.2, 0.4, 0.2, 0.1, 0.1)),
    "B": ((0.05, 0.05, 0.1, 0.5, 0.3), (0.3, 0.5, 0.1, 0.05, 0.05)),
    "C": ((0.05, 0.05, 0.1, 0.1, 0.7), (0.7, 0.1, 0.1, 0.05, 0.05)),
}

BUILTIN_SPECS = {
    **{f"toy-{k}": ToySpec(ps, pt, name=f"toy-{k}") for k, (ps, pt) in TOY_MIXING.items()},
    "overlap-small": OverlapSpec(10.0, name="overlap-small"),
    "overlap-large": OverlapSpec(1.0, name="overlap-large"),
}


def get_spec(name_or_path, seed=None):
    """Look up a built-in spec by name or load one from a JSON file."""
    if name_or_path in BUILTIN_SPECS:
        spec = BUILTIN_SPECS[name_or_path]
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise ValueError(f"unknown spec {name_or_path!r}; built-ins: {sorted(BUILTIN_SPECS)}")
        spec = spec_from_dict(json.loads(path.read_text(encoding="utf-8")))
    return spec if seed is None else replace(spec, seed=int(seed))


def spec_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", "overlap" if "mean_separation" in d else "toy")
    return OverlapSpec.from_dict(d) if kind == "overlap" else ToySpec.from_dict(d)
