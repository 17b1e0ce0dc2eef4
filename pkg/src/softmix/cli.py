"""Command line interface.

Subcommands:

* ``run <config.yaml>``            -- full experiment, writes report + CSVs
* ``gen <genspec.yaml> -o <file>`` -- generate a dataset to CSV (or records)
* ``check-gradients <loss.yaml>``  -- randomized finite-difference audit
* ``bounds <config.yaml>``         -- print theory quantities only

Worker count for repetitions comes from the SOFTMIX_WORKERS env var.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from .config import ConfigError, validate_config
from .datagen import GenSpec, generate, save_csv, save_records
from .data import ParamSet
from .experiment import run_experiment, run_repetition, _format_constants, _format_quantities
from .losses import LINKS, LossModel, certify
from .verify import finite_diff_gradient


def _load_yaml(path):
    with open(path) as fh:
        return yaml.safe_load(fh)


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        config = validate_config(fh.read())
    if args.output_dir:
        import dataclasses

        config = dataclasses.replace(config, output_dir=args.output_dir)
    report = run_experiment(config)
    sys.stdout.write(
        f"{len(report.repetitions)} repetitions, "
        f"success_frequency={report.success_frequency:.4f}\n"
    )
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        sys.stdout.write(f"check {check.name}: {status} ({check.detail})\n")
    sys.stdout.write(f"outputs written to {config.output_dir}\n")
    return 1 if report.failed_checks else 0


def _cmd_gen(args) -> int:
    doc = _load_yaml(args.genspec)
    if not isinstance(doc, dict):
        raise ConfigError("genspec must be a mapping")
    if doc.get("truth") is not None:
        doc["truth"] = ParamSet(np.asarray(doc["truth"], dtype=float))
    if doc.get("mix_weights") is not None:
        doc["mix_weights"] = tuple(float(w) for w in doc["mix_weights"])
    spec = GenSpec(**doc)
    dataset, _ = generate(spec)
    if args.format == "csv":
        save_csv(dataset, args.output)
    else:
        save_records(dataset, args.output, kind=spec.kind, seed=spec.seed)
    sys.stdout.write(f"wrote {dataset.n} samples (d={dataset.d}) to {args.output}\n")
    return 0


def _cmd_check_gradients(args) -> int:
    doc = _load_yaml(args.loss_spec)
    link = LINKS[doc["link"]] if doc.get("link") else None
    model = LossModel(
        family=doc["family"], lam=float(doc.get("lam", 0.0)), link=link
    )
    rng = np.random.default_rng(int(doc.get("seed", 0)))
    d = int(doc.get("d", 3))
    classification = model.family in ("logistic", "squared_hinge", "plain_hinge")
    worst = 0.0
    from .data import LabeledSample
    from .losses import loss_gradient

    for _ in range(args.trials):
        x = rng.standard_normal(d)
        y = float(rng.choice([-1.0, 1.0])) if classification else float(rng.standard_normal())
        theta = rng.standard_normal(d)
        sample = LabeledSample(x, y)
        analytic = loss_gradient(model, sample, theta)
        numeric = finite_diff_gradient(model, sample, theta)
        denom = max(float(np.linalg.norm(analytic)), 1.0)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / denom))
    ok = worst <= 1e-5
    sys.stdout.write(
        f"{model.family}: worst relative error {worst:.3g} over {args.trials} trials "
        f"-> {'PASS' if ok else 'FAIL'}\n"
    )
    return 0 if ok else 1


def _cmd_bounds(args) -> int:
    with open(args.config) as fh:
        config = validate_config(fh.read())
    result = run_repetition(config, 0)
    sys.stdout.write("constants:  " + _format_constants(result.constants) + "\n")
    sys.stdout.write("quantities: " + _format_quantities(result.quantities) + "\n")
    bound = "n/a" if result.predicted_bound is None else f"{result.predicted_bound:.6g}"
    sys.stdout.write(
        f"gamma={result.gamma:.6g} d0={result.initial_distance:.6g} "
        f"predicted_bound={bound}\n"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softmix",
        description="Gradient EM for soft-min mixture fitting, with bound validation. "
        "Defaults: beta=1.0 ('inf' selects hard min), gamma=1/(2*mean smoothness), "
        "resample=true, init perturb_reference with c_ini=0.2, reference=truth, "
        "repetitions=1, c_universal=1.0, output_dir=softmix-out.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--output-dir", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("gen", help="generate a dataset from a genspec")
    p_gen.add_argument("genspec")
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.add_argument("--format", choices=("csv", "records"), default="csv")
    p_gen.set_defaults(func=_cmd_gen)

    p_chk = sub.add_parser("check-gradients", help="finite-difference gradient audit")
    p_chk.add_argument("loss_spec")
    p_chk.add_argument("--trials", type=int, default=100)
    p_chk.set_defaults(func=_cmd_check_gradients)

    p_bounds = sub.add_parser("bounds", help="print theory quantities for a config")
    p_bounds.add_argument("config")
    p_bounds.set_defaults(func=_cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
