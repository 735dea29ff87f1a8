"""Command-line interface.

Subcommands::

    gen-toy    --spec <name|file> --domain <source|target> --seed N --out PATH
    estimate   --method <attribute|straightforward|ulsif|ground-truth> --source PATH ...
    train      --data PATH [--weights PATH] --out model.json
    eval       --model model.json --data PATH [--weights PATH]
    diagnose   --source PATH --target PATH
    run        --config config.json
    reproduce  <table2|table3|fig2|fig3|fig5> --seeds "1..10" --out DIR

Errors exit with status 1 (2 for usage errors) and a message tagged by stage.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classifier import CvGrid, load_model, save_model, train_weighted, weighted_risk
from .core import SOURCE, TARGET, load_dataset, load_weights, save_dataset, save_weights
from .density_ratio import fit_ulsif, ground_truth_weights
from .experiments import (REPRODUCIBLE, ExperimentError, RunConfig, default_output_dir,
                          emit_figure_data, parse_seeds, reproduce_table2, reproduce_table3,
                          run_experiment)
from .metrics import accuracy, assumption_diagnostic
from .toydata import generate, get_spec
from .weights import estimate_weights, straightforward_weights


class CliError(Exception):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")


def _prior(text, name):
    if text is None:
        return None
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        path = Path(text)
        if not path.is_file():
            raise CliError("args", f"{name} must be a JSON array or a JSON file") from None
        value = json.loads(path.read_text(encoding="utf-8"))
    return np.asarray(value, dtype=float)


def _json_out(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_gen_toy(args):
    spec = get_spec(args.spec, seed=args.seed)
    save_dataset(generate(spec, args.domain), args.out)


def cmd_estimate(args):
    required = {"attribute": "prior_target", "straightforward": "prior_target",
                "ulsif": "target", "ground-truth": "spec"}[args.method]
    if getattr(args, required) is None:
        flag = "--" + required.replace("_", "-")
        raise CliError("args", f"{flag} is required for --method {args.method}")
    source = load_dataset(args.source)
    if args.method == "attribute":
        w = estimate_weights(source, _prior(args.prior_source, "--prior-source"),
                             _prior(args.prior_target, "--prior-target"), args.k,
                             normalize=args.normalize)
    elif args.method == "straightforward":
        w = straightforward_weights(source, _prior(args.prior_source, "--prior-source"),
                                    _prior(args.prior_target, "--prior-target"))
    elif args.method == "ulsif":
        w = fit_ulsif(source, load_dataset(args.target), seed=args.seed).predict(source.X)
    else:
        w = ground_truth_weights(get_spec(args.spec), source.X)
    save_weights(w, args.out)


def _grid(args):
    kw = {"folds": args.folds}
    if args.widths:
        kw["widths"] = tuple(args.widths)
    if args.regs:
        kw["regs"] = tuple(args.regs)
    return CvGrid(**kw)


def cmd_train(args):
    data = load_dataset(args.data)
    w = load_weights(args.weights, len(data)) if args.weights else None
    model = train_weighted(data, w, _grid(args), seed=args.seed)
    save_model(model, args.out)
    _json_out({"kernel_width": model.kernel_width, "regularization": model.regularization,
               "training_accuracy": accuracy(model, data)})


def cmd_eval(args):
    model = load_model(args.model)
    data = load_dataset(args.data)
    result = {"accuracy": accuracy(model, data), "n_samples": len(data)}
    if args.weights:
        result["weighted_risk"] = weighted_risk(model, data, load_weights(args.weights, len(data)))
    _json_out(result)


def cmd_diagnose(args):
    auc = assumption_diagnostic(load_dataset(args.source), load_dataset(args.target),
                                n_neighbors=args.k, seed=args.seed)
    _json_out({"auc": [None if np.isnan(a) else float(a) for a in auc]})


def cmd_run(args):
    cfg = RunConfig.from_json(args.config)
    if cfg.output_dir is None:
        cfg.output_dir = str(args.out or default_output_dir())
    _json_out(run_experiment(cfg).summary)


def cmd_reproduce(args):
    seeds = parse_seeds(args.seeds)
    out = Path(args.out or default_output_dir())
    if args.target == "table2":
        result = reproduce_table2(seeds, out)
    elif args.target == "table3":
        result = reproduce_table3(seeds, out)
    else:
        result = emit_figure_data(args.target, seeds, out)
    _json_out(result)


def build_parser():
    p = argparse.ArgumentParser(prog="attrshift", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-toy", help="generate a synthetic dataset")
    g.add_argument("--spec", required=True, help="built-in name or spec JSON file")
    g.add_argument("--domain", choices=[SOURCE, TARGET], default=SOURCE)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_toy, stage="gen-toy")

    e = sub.add_parser("estimate", help="estimate source instance weights")
    e.add_argument("--method", required=True,
                   choices=["attribute", "straightforward", "ulsif", "ground-truth"])
    e.add_argument("--source", required=True)
    e.add_argument("--target")
    e.add_argument("--prior-source", help="JSON array; empirical frequencies if omitted")
    e.add_argument("--prior-target", help="JSON array")
    e.add_argument("--spec", help="synthetic spec for ground-truth weights")
    e.add_argument("--k", type=int)
    e.add_argument("--normalize", action="store_true", help="rescale weights to mean 1")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate, stage="estimate")

    t = sub.add_parser("train", help="train a weighted kernel classifier with CV")
    t.add_argument("--data", required=True)
    t.add_argument("--weights")
    t.add_argument("--folds", type=int, default=5)
    t.add_argument("--widths", type=float, nargs="*")
    t.add_argument("--regs", type=float, nargs="*")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train, stage="train")

    v = sub.add_parser("eval", help="accuracy (and weighted risk) of a saved model")
    v.add_argument("--model", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--weights")
    v.set_defaults(func=cmd_eval, stage="eval")

    d = sub.add_parser("diagnose", help="per-attribute domain-classifier AUC")
    d.add_argument("--source", required=True)
    d.add_argument("--target", required=True)
    d.add_argument("--k", type=int)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_diagnose, stage="diagnose")

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run, stage="run")

    rp = sub.add_parser("reproduce", help="reproduce a table or figure")
    rp.add_argument("target", choices=REPRODUCIBLE)
    rp.add_argument("--seeds", default="1..10")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_reproduce, stage="reproduce")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, ExperimentError) as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error [{args.stage}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
