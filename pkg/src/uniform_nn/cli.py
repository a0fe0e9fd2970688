"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data error, 4 training did not
converge (or the solver failed), 5 outlier removal refused to empty the set.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .baseline import DivergenceError, GdConfig, train_mse
from .bisection import BisectionConfig, train_uniform
from .data import DataError, DegenerateRemovalError, OutlierSpec, SubsetSpec, \
    atomic_write, build_subset, generate_synthetic, read_ucr, remove_outliers, \
    write_ucr
from .experiment import evaluate, load_config, render_table, run_experiment, \
    write_report
from .feasibility import LinearSolverError
from .model import LeakyReLU, WeightVector, mse_loss, uniform_loss

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NONCONVERGED = 4
EXIT_DEGENERATE = 5

log = logging.getLogger("uniform_nn")


def _label_counts(text: str) -> dict[float, int] | list[int]:
    """``"10,10"`` (ascending label order) or ``"1:35,2:5"``."""
    parts = [p for p in text.split(",") if p]
    if all(":" in p for p in parts):
        return {float(k): int(v) for k, v in (p.split(":") for p in parts)}
    return [int(p) for p in parts]


def _add_bisection(p):
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.01)


def _add_subset(p):
    p.add_argument("--mode", choices=["full", "first_k_per_class", "random_k"],
                   default="full")
    p.add_argument("--counts", type=_label_counts, default={})
    p.add_argument("--total", type=int, default=0)
    p.add_argument("--subset-seed", type=int, default=0)


def _bisection_cfg(args) -> BisectionConfig:
    return BisectionConfig(args.epsilon, args.max_iterations, args.alpha)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uniform-nn",
        description="Uniform-loss and least-squares training of a single-node network.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one arm on a UCR file")
    p.add_argument("--train", required=True, help="training data file")
    p.add_argument("--arm", choices=["uniform", "mse"], default="uniform")
    _add_subset(p)
    _add_bisection(p)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=0.01)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", required=True, help="weights file (JSON)")

    p = sub.add_parser("evaluate", help="score saved weights on a test file")
    p.add_argument("--weights", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", help="write the confusion matrix as JSON here")

    p = sub.add_parser("experiment", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="report path (.json)")
    p.add_argument("--data-root", default=None,
                   help="directory that relative data paths resolve against")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("remove-outliers", help="drop high-deviation samples")
    p.add_argument("--train", required=True)
    p.add_argument("--method", choices=["tolerance", "top_k"], default="tolerance")
    p.add_argument("--tolerance", type=float, default=1e-7)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--allow-all", action="store_true")
    _add_bisection(p)
    p.add_argument("--kept", required=True, help="output file for kept samples")
    p.add_argument("--removed", help="output file for removed samples")

    p = sub.add_parser("synth", help="write a synthetic two-cluster dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--counts", type=_label_counts, required=True,
                   help="label:count pairs, e.g. 1:5,2:35")
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _cmd_train(args) -> int:
    z = read_ucr(args.train)
    spec = SubsetSpec(args.mode, args.counts, args.total, args.subset_seed)
    z = build_subset(z, spec)
    a = LeakyReLU(args.alpha)
    info: dict = {"arm": args.arm, "alpha": args.alpha,
                  "class_labels": list(z.class_labels), "train_size": len(z)}
    if args.arm == "uniform":
        rep = train_uniform(z, _bisection_cfg(args))
        w = rep.weights
        info.update(lower=rep.lower, upper=rep.upper, iterations=rep.iterations,
                    converged=rep.converged, train_loss=uniform_loss(w, a, z))
    else:
        gd = GdConfig(args.learning_rate, args.epochs, args.init_seed,
                      args.init_scale, args.standardize)
        w = train_mse(z, gd, a)
        info.update(converged=True, train_loss=mse_loss(w, a, z))
    info.update(bias=w.bias, weights=w.weights.tolist())
    atomic_write(args.out, json.dumps(info, indent=2) + "\n")
    print(f"{args.arm}: training loss {info['train_loss']:.6g} -> {args.out}")
    return EXIT_OK if info["converged"] else EXIT_NONCONVERGED


def _cmd_evaluate(args) -> int:
    with open(args.weights, encoding="utf-8") as fh:
        info = json.load(fh)
    try:
        w = WeightVector(info["bias"], np.asarray(info["weights"], dtype=float))
        a = LeakyReLU(info.get("alpha", 0.01))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.weights}: malformed weights file ({exc})") from None
    test = read_ucr(args.test)
    if test.n != w.n:
        raise DataError(f"test data has {test.n} features, weights expect {w.n}")
    labels = sorted(set(info.get("class_labels", [])) | set(test.class_labels))
    cm = evaluate(w, a, test, labels)
    print(f"accuracy {100 * cm.accuracy:.2f}% ({cm.correct}/{cm.total})")
    for row in cm.counts:
        print("  " + " ".join(f"{v:5d}" for v in row))
    if args.out:
        atomic_write(args.out, json.dumps(cm.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config, data_root=args.data_root)
    if args.workers is not None:
        from dataclasses import replace
        cfg = replace(cfg, workers=args.workers)
    report = run_experiment(cfg)
    write_report(report, args.out)
    sys.stdout.write(render_table(report))
    if not report.converged:
        print("warning: a training run did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _cmd_remove_outliers(args) -> int:
    z = read_ucr(args.train)
    spec = OutlierSpec(args.method, args.tolerance, args.k, args.allow_all)
    kept, removed, rep = remove_outliers(z, _bisection_cfg(args), spec)
    write_ucr(kept, args.kept)
    if args.removed:
        write_ucr(removed, args.removed)
    print(f"removed {len(removed)} of {len(z)} (max deviation "
          f"{rep.deviations.max():.6g}); kept {len(kept)} -> {args.kept}")
    return EXIT_OK if rep.training.converged else EXIT_NONCONVERGED


def _cmd_synth(args) -> int:
    counts = args.counts
    if not isinstance(counts, dict):
        raise DataError("--counts needs label:count pairs")
    z = generate_synthetic(args.n, counts, args.separation, args.noise, args.seed)
    write_ucr(z, args.out)
    print(f"wrote {len(z)} samples with {z.n} features -> {args.out}")
    return EXIT_OK


COMMANDS = {"train": _cmd_train, "evaluate": _cmd_evaluate,
            "experiment": _cmd_experiment, "remove-outliers": _cmd_remove_outliers,
            "synth": _cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (LinearSolverError, DivergenceError) as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except DegenerateRemovalError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
