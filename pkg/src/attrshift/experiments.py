"""Experiment orchestration and reproduction of the toy-data results.

Output layout for ``run_experiment``::

    <output_dir>/<experiment>/<seed>/weights.csv
    <output_dir>/<experiment>/<seed>/model.json      (when a model is trained)
    <output_dir>/<experiment>/<seed>/metrics.json
    <output_dir>/<experiment>/summary.json

All emitted files are deterministic functions of the config; wall-clock
timings are kept on the returned :class:`RunResult` and only written when
``record_timing`` is set.
"""

import csv
import json
import logging
import math
import os
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .classifier import CvGrid, save_model, train_weighted
from .core import SOURCE, TARGET, empirical_attribute_prior, load_dataset, save_weights
from .density_ratio import LAMBDA_GRID, fit_ulsif, ground_truth_weights, oracle_attribute_weights
from .metrics import accuracy, weight_rmse
from .toydata import BUILTIN_SPECS, OverlapSpec, ToySpec, generate, get_spec, spec_from_dict
from .weights import AttributeWeightEstimator, StraightforwardWeightEstimator

log = logging.getLogger(__name__)

METHODS = ("attribute", "straightforward", "ulsif", "ground-truth", "none")
OUTPUT_ENV = "ATTRSHIFT_OUTPUT_DIR"
TABLE_DATASETS = ("toy-A", "toy-B", "toy-C")
TABLE2_METHODS = ("attribute", "ulsif")
TABLE3_METHODS = ("none", "attribute", "ground-truth")

# reported values, used only for side-by-side columns in the emitted tables
REPORTED_TABLE2 = {"attribute": (0.179, 0.573, 0.679), "ulsif": (0.291, 0.664, 0.743)}
REPORTED_TABLE3 = {"none": (91.3, 90.4, 88.1), "attribute": (92.4, 91.0, 90.2),
                "ground-truth": (92.4, 90.9, 90.4)}


class ExperimentError(RuntimeError):
    """Failure inside one stage of an experiment."""

    def __init__(self, stage, message, seed=None):
        self.stage = stage
        self.seed = seed
        where = f"{stage}" if seed is None else f"{stage}, seed {seed}"
        super().__init__(f"[{where}] {message}")


def default_output_dir():
    return Path(os.environ.get(OUTPUT_ENV, "results"))


def parse_seeds(text):
    """Parse ``"1..10"``, ``"3"`` or ``"1,4,7"`` into a list of ints."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("at least one seed is required")
    return seeds


@dataclass
class RunConfig:
    """Everything that determines one experiment.

    Either ``spec`` (built-in name or a spec dict) or ``source_path`` must be
    given. ``prior_source``/``prior_target`` override the spec's mixing
    ratios; with dataset files ``prior_target`` is required for the
    attribute-based methods.
    """

    experiment: str
    method: str = "attribute"
    spec: object = None
    source_path: Optional[str] = None
    target_path: Optional[str] = None
    prior_source: Optional[list] = None
    prior_target: Optional[list] = None
    k: Optional[int] = None
    normalize_weights: bool = False
    cv: dict = field(default_factory=dict)
    ulsif: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    output_dir: Optional[str] = None
    train: bool = True
    rmse_on: str = SOURCE
    record_timing: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        self.seeds = [int(s) for s in self.seeds]
        if self.spec is None and self.source_path is None:
            raise ValueError("either spec or source_path is required")
        if self.method == "ulsif" and self.spec is None and self.target_path is None:
            raise ValueError("method 'ulsif' needs target data")
        if self.method == "ground-truth" and self.spec is None:
            raise ValueError("method 'ground-truth' needs a synthetic spec")
        if self.spec is None and self.method in ("attribute", "straightforward") \
                and self.prior_target is None:
            raise ValueError(f"method {self.method!r} needs prior_target")
        if self.rmse_on not in (SOURCE, TARGET):
            raise ValueError("rmse_on must be 'source' or 'target'")

    def resolve_spec(self):
        if self.spec is None:
            return None
        if isinstance(self.spec, (ToySpec, OverlapSpec)):
            return self.spec
        if isinstance(self.spec, dict):
            return spec_from_dict(self.spec)
        return get_spec(self.spec)

    def cv_grid(self):
        return CvGrid(**{k: tuple(v) if isinstance(v, list) else v for k, v in self.cv.items()})

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.spec, (ToySpec, OverlapSpec)):
            d["spec"] = self.spec.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class RunResult:
    experiment: str
    method: str
    records: list
    summary: dict
    wall_times: list = field(default_factory=list)


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mean_std(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def summarize(records):
    """Seed mean and sample standard deviation of every numeric metric."""
    keys = sorted({k for r in records for k, v in r.items()
                   if k != "seed" and isinstance(v, (int, float)) and not isinstance(v, bool)})
    out = {}
    for k in keys:
        mean, std = _mean_std([r.get(k) for r in records])
        out[k] = {"mean": mean, "std": std, "n": sum(r.get(k) is not None for r in records)}
    return out


def _priors(config, spec, source):
    if config.prior_source is not None:
        ps = np.asarray(config.prior_source, dtype=float)
    elif spec is not None:
        ps = spec.mixing(SOURCE)
    else:
        ps = empirical_attribute_prior(source)
    pt = np.asarray(config.prior_target, dtype=float) if config.prior_target is not None \
        else spec.mixing(TARGET)
    return ps, pt


def _load_data(config, spec, seed):
    if spec is not None:
        s = replace(spec, seed=seed)
        return s, generate(s, SOURCE), generate(s, TARGET)
    source = load_dataset(config.source_path)
    target = load_dataset(config.target_path) if config.target_path else None
    return None, source, target


def compute_weights(config, spec, source, target, seed):
    """Source weights for the configured method plus a query function.

    The query function evaluates the same weight model at other points (used
    for RMSE on target samples); it is ``None`` when the method only
    defines weights on the source samples.
    """
    m = config.method
    info = {}
    if m == "none":
        return np.ones(len(source)), (lambda D: np.ones(len(D))), info
    if m == "ground-truth":
        return ground_truth_weights(spec, source.X), (lambda D: ground_truth_weights(spec, D.X)), info
    if m == "ulsif":
        opts = {"num_basis": 100, "sigma_grid": None, "lambda_grid": LAMBDA_GRID, **config.ulsif}
        model = fit_ulsif(source, target, opts["num_basis"], opts["sigma_grid"],
                          opts["lambda_grid"], seed=seed)
        info.update(ulsif_sigma=model.sigma_, ulsif_lambda=model.lambda_)
        return model.predict(source.X), (lambda D: model.predict(D.X)), info
    ps, pt = _priors(config, spec, source)
    if m == "straightforward":
        est = StraightforwardWeightEstimator(pt, ps).fit(source.X, source.z)
        return est.weights_, (lambda D: est.predict(D.z)), info
    est = AttributeWeightEstimator(pt, ps, n_neighbors=config.k,
                                   normalize=config.normalize_weights).fit(source.X, source.z)
    info["k"] = est.posterior_estimator_.k_
    return est.weights_, est.predict, info


def _run_seed(config, spec, seed, seed_dir):
    stage = "data"
    try:
        spec_s, source, target = _load_data(config, spec, seed)
        stage = "weights"
        w, query, info = compute_weights(config, spec_s, source, target, seed)
        record = {"seed": seed, **info}
        stage = "metrics"
        if spec_s is not None:
            if config.rmse_on == SOURCE:
                record["weight_rmse"] = weight_rmse(w, ground_truth_weights(spec_s, source.X))
            else:
                record["weight_rmse"] = weight_rmse(query(target),
                                                    ground_truth_weights(spec_s, target.X))
        model = None
        if config.train:
            stage = "train"
            model = train_weighted(source, w, config.cv_grid(), seed=seed)
            record.update(kernel_width=model.kernel_width, regularization=model.regularization)
            stage = "eval"
            record["source_accuracy"] = accuracy(model, source)
            if target is not None and (target.y >= 0).all():
                record["target_accuracy"] = accuracy(model, target)
        stage = "write"
        if seed_dir is not None:
            seed_dir.mkdir(parents=True, exist_ok=True)
            save_weights(w, seed_dir / "weights.csv")
            if model is not None:
                save_model(model, seed_dir / "model.json")
            _dump_json(record, seed_dir / "metrics.json")
        return record
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(stage, f"{type(exc).__name__}: {exc}", seed) from exc


def run_experiment(config):
    """Run ``config`` for every seed and aggregate the per-seed records."""
    try:
        spec = config.resolve_spec()
    except Exception as exc:
        raise ExperimentError("config", str(exc)) from exc
    root = Path(config.output_dir) / config.experiment if config.output_dir else None
    records, times = [], []
    for seed in config.seeds:
        t0 = time.perf_counter()
        records.append(_run_seed(config, spec, seed, root / str(seed) if root else None))
        times.append(time.perf_counter() - t0)
        log.info("%s seed %d done in %.2fs", config.experiment, seed, times[-1])
    summary = {"experiment": config.experiment, "method": config.method,
               "seeds": list(config.seeds), "metrics": summarize(records)}
    if config.record_timing:
        summary["wall_time"] = {"per_seed": times, "total": sum(times)}
        for r, t in zip(records, times):
            r["wall_time"] = t
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        _dump_json(summary, root / "summary.json")
    return RunResult(config.experiment, config.method, records, summary, times)


def _write_table(path, rows, datasets):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method"] + list(datasets))
        for method, values in rows.items():
            writer.writerow([method] + [repr(float(v)) for v in values])


def reproduce_table2(seeds, output_dir, datasets=TABLE_DATASETS, **overrides):
    """Seed-mean weight RMSE for the attribute method and uLSIF.

    Writes ``table2.csv`` (method x dataset) and ``table2.json`` with the
    per-dataset means, standard deviations and reported reference values.
    """
    out = Path(output_dir)
    table, detail = {}, {}
    for method in TABLE2_METHODS:
        row = []
        for name in datasets:
            cfg = RunConfig(experiment=f"table2/{name}/{method}", method=method, spec=name,
                            seeds=list(seeds), output_dir=str(out), train=False, **overrides)
            stats = run_experiment(cfg).summary["metrics"]["weight_rmse"]
            row.append(stats["mean"])
            detail[f"{method}/{name}"] = stats
        table[method] = row
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "table2.csv", table, datasets)
    _dump_json({"datasets": list(datasets), "seeds": list(seeds), "rmse": table, "detail": detail,
                "reported": {m: list(v) for m, v in REPORTED_TABLE2.items()}}, out / "table2.json")
    return table


def reproduce_table3(seeds, output_dir, datasets=TABLE_DATASETS, **overrides):
    """Seed-mean target accuracy (percent) without weights, with estimated and true weights."""
    out = Path(output_dir)
    table, detail = {}, {}
    for method in TABLE3_METHODS:
        row = []
        for name in datasets:
            cfg = RunConfig(experiment=f"table3/{name}/{method}", method=method, spec=name,
                            seeds=list(seeds), output_dir=str(out), **overrides)
            stats = run_experiment(cfg).summary["metrics"]["target_accuracy"]
            row.append(100.0 * stats["mean"])
            detail[f"{method}/{name}"] = stats
        table[method] = row
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "table3.csv", table, datasets)
    _dump_json({"datasets": list(datasets), "seeds": list(seeds), "accuracy_percent": table,
                "detail": detail, "reported": {m: list(v) for m, v in REPORTED_TABLE3.items()}},
               out / "table3.json")
    return table


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def _histogram_rows(method, weights, z, bins):
    rows = []
    for cls in np.unique(z):
        counts, edges = np.histogram(weights[z == cls], bins=bins)
        rows.extend((method, int(cls), float(edges[i]), float(edges[i + 1]), int(c))
                    for i, c in enumerate(counts))
    return rows


def _overlap_figure(spec, out, k=None, grid_points=401):
    source = generate(spec, SOURCE)
    est = AttributeWeightEstimator(spec.prior_target, spec.prior_source, n_neighbors=k)
    w = est.fit(source.X, source.z).weights_
    w_sf = StraightforwardWeightEstimator(spec.prior_target, spec.prior_source) \
        .fit(source.X, source.z).weights_
    lo, hi = source.X.min() - 1.0, source.X.max() + 1.0
    grid = np.linspace(lo, hi, grid_points).reshape(-1, 1)
    dens = np.exp(spec.component_logpdf(grid))
    _write_rows(out / "weight_curve.csv",
                ["x", "weight_estimated", "weight_oracle", "density_ratio",
                 "density_z0", "density_z1"],
                zip(grid[:, 0], est.predict(grid), oracle_attribute_weights(spec, grid),
                    ground_truth_weights(spec, grid), dens[:, 0], dens[:, 1]))
    _write_rows(out / "samples.csv", ["index", "x", "z", "weight", "weight_straightforward"],
                zip(range(len(source)), source.X[:, 0], source.z, w, w_sf))
    top = max(float(w.max()), float(w_sf.max()), 1e-12)
    bins = np.linspace(0.0, top, 21)
    _write_rows(out / "histogram.csv", ["method", "z", "bin_left", "bin_right", "count"],
                _histogram_rows("attribute", w, source.z, bins)
                + _histogram_rows("straightforward", w_sf, source.z, bins))
    return {"min_weight_z1": float(w[source.z == 1].min()),
            "max_weight_z1": float(w[source.z == 1].max()),
            "mean_weight_z0": float(w[source.z == 0].mean()),
            "k": est.posterior_estimator_.k_}


def _toy_figure(spec, out, seed, k=None, cv_grid=None, grid_shape=(121, 61)):
    source = generate(spec, SOURCE)
    est = AttributeWeightEstimator(spec.mixing_target, spec.mixing_source, n_neighbors=k)
    w = est.fit(source.X, source.z).weights_
    cv_grid = cv_grid or CvGrid()
    plain = train_weighted(source, None, cv_grid, seed=seed)
    weighted = train_weighted(source, w, cv_grid, seed=seed)
    _write_rows(out / "samples.csv", ["index", "x0", "x1", "y", "z", "weight"],
                zip(range(len(source)), source.X[:, 0], source.X[:, 1], source.y, source.z, w))
    g0 = np.linspace(-1.5 * math.pi, 1.5 * math.pi, grid_shape[0])
    g1 = np.linspace(spec.x1_range[0], spec.x1_range[1], grid_shape[1])
    G = np.array([(a, b) for a in g0 for b in g1])
    _write_rows(out / "decision_grid.csv",
                ["x0", "x1", "decision_unweighted", "decision_weighted", "true_logit"],
                zip(G[:, 0], G[:, 1], plain.decision_function(G), weighted.decision_function(G),
                    spec.posterior_gain * (G[:, 1] - np.sin(G[:, 0]))))
    left = source.X[:, 0] < -0.5 * math.pi
    save_model(plain, out / "model_unweighted.json")
    save_model(weighted, out / "model_weighted.json")
    return {"mean_weight": float(w.mean()), "mean_weight_left": float(w[left].mean()),
            "k": est.posterior_estimator_.k_}


FIGURE_SPECS = {"fig2": "overlap-small", "fig3": "overlap-large", "fig5": "toy-A"}


def emit_figure_data(experiment, seeds, output_dir, spec=None, k=None):
    """Write plot-ready CSVs for one figure under ``<output_dir>/<experiment>/<seed>/``."""
    if experiment not in FIGURE_SPECS:
        raise ValueError(f"unknown figure {experiment!r}; choose from {sorted(FIGURE_SPECS)}")
    base = spec if spec is not None else BUILTIN_SPECS[FIGURE_SPECS[experiment]]
    results = {}
    for seed in seeds:
        s = replace(base, seed=int(seed))
        out = Path(output_dir) / experiment / str(seed)
        out.mkdir(parents=True, exist_ok=True)
        try:
            if experiment == "fig5":
                stats = _toy_figure(s, out, int(seed), k)
            else:
                stats = _overlap_figure(s, out, k)
        except Exception as exc:
            raise ExperimentError(experiment, f"{type(exc).__name__}: {exc}", seed) from exc
        _dump_json(stats, out / "metrics.json")
        results[int(seed)] = stats
    return results


REPRODUCIBLE = ("table2", "table3", "fig2", "fig3", "fig5")


def reproduce(target, seeds, output_dir):
    if target == "table2":
        return reproduce_table2(seeds, output_dir)
    if target == "table3":
        return reproduce_table3(seeds, output_dir)
    if target in FIGURE_SPECS:
        return emit_figure_data(target, seeds, output_dir)
    raise ValueError(f"unknown reproduction target {target!r}; choose from {REPRODUCIBLE}")

