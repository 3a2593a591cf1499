"""Command-line interface: ``aumline {path,train,oracle,synth,bench}``.

Exit codes: 0 success, 2 input or configuration error, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import contextlib
import os
import sys

import numpy as np

from . import bench as _bench
from . import io as _io
from . import path as _path
from .descent import DEFAULT_GRID, TrainConfig, aum_subgradient, descent_direction, train
from .error_model import (ParseError, ValidationError, load_breakpoints, load_labels,
                          subset, write_breakpoints)
from .roc import grid_evaluate
from .synth import binary_unbalanced, changepoint_nonmono


class UsageError(Exception):
    pass


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _variant(text):
    return text.replace("-", "_")


def _load_problem(args):
    """Features aligned with the error model; labels when given."""
    if (args.labels is None) == (args.breakpoints is None):
        raise UsageError("give exactly one of --labels or --breakpoints")
    for f in (args.features, args.labels, args.breakpoints):
        if f is not None and not os.path.exists(f):
            raise UsageError(f"no such file: {f}")
    if args.labels is not None:
        model, y = load_labels(args.labels)
    else:
        model, y = load_breakpoints(args.breakpoints), None
    X, _ = _io.read_features(args.features, model.example_ids)
    return X, model, y


def _vector_or(path, default, name, p):
    if path is None:
        return default
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    v = _io.read_vector(path)
    if len(v) != p:
        raise UsageError(f"{name} has length {len(v)}, expected {p}")
    return v


def _weights_direction(args, X, model):
    p = X.shape[1]
    w = _vector_or(args.weights, np.zeros(p), "weights", p)
    d = _vector_or(args.direction, None, "direction", p)
    if d is None:
        d = descent_direction(X, aum_subgradient(X @ w, model))
    return w, d


def cmd_path(args):
    X, model, _ = _load_problem(args)
    w, d = _weights_direction(args, X, model)
    variant = _variant(args.variant)
    if variant == "max_auc_validation":
        variant = "max_auc"
    if variant not in _path.VARIANTS:
        raise UsageError(f"path variant must be one of {_path.VARIANTS}")
    result = _path.line_search(_path.build_lines(w, d, X, model), model, variant,
                               args.max_events)
    with _output(args.out) as fh:
        _path.write_path(result, fh)
    print(f"events={result.n_events} segments={len(result)} "
          f"min_aum_step={_path.choose_step(result, 'min_aum')!r} "
          f"max_auc_step={_path.choose_step(result, 'max_auc')!r} "
          f"truncated={result.truncated}", file=sys.stderr)


def cmd_oracle(args):
    X, model, _ = _load_problem(args)
    w, d = _weights_direction(args, X, model)
    steps = _io.parse_steps(args.steps)
    with _output(args.out) as fh:
        fh.write("step,aum,auc\n")
        for s, a, c in grid_evaluate(w, d, X, model, steps):
            fh.write(f"{s!r},{a!r},{c!r}\n")


def _split(n, y, fraction, seed):
    """Seeded subtrain/validation split, stratified when labels are known."""
    rng = np.random.default_rng(seed)
    if y is None:
        groups = [np.arange(n)]
    else:
        groups = [np.flatnonzero(y == 1), np.flatnonzero(y == -1)]
    val = []
    for g in groups:
        g = rng.permutation(g)
        k = int(round(fraction * len(g)))
        val.extend(g[:min(max(k, 1), len(g) - 1)].tolist())
    val = np.array(sorted(val), dtype=np.intp)
    sub = np.setdiff1d(np.arange(n), val)
    return sub, val


def cmd_train(args):
    if not 0 < args.validation_fraction < 1:
        raise UsageError("--validation-fraction must be in (0, 1)")
    X, model, y = _load_problem(args)
    sub, val = _split(len(X), y, args.validation_fraction, args.seed)
    try:
        model_sub, model_val = subset(model, sub), subset(model, val)
    except ValidationError as err:
        raise UsageError(f"split leaves a side without errors: {err}") from err
    config = TrainConfig(variant=_variant(args.variant), aum_tolerance=args.aum_tol,
                         max_steps=args.max_steps,
                         grid=tuple(_io.parse_steps(args.grid)) if args.grid else DEFAULT_GRID,
                         seed=args.seed, init=args.init, init_scale=args.init_scale,
                         record_time=not args.no_timing)
    w, log = train(X[sub], model_sub, X[val], model_val, config)
    with _output(args.out) as fh:
        log.write_csv(fh)
    if args.weights_out:
        with _output(args.weights_out) as fh:
            _io.write_vector(w, fh)
    print(f"steps={log.n_steps} stop={log.stop_reason} "
          f"aum_subtrain={log.rows[-1].aum_subtrain!r} "
          f"initial_validation_auc={log.rows[0].auc_validation!r} "
          f"max_validation_auc={log.max_validation_auc()!r}", file=sys.stderr)


def cmd_synth(args):
    kind = args.kind.replace("-", "_")
    binary = kind in ("binary", "binary_unbalanced")
    # two examples suffice for a looping changepoint instance
    if args.n < (4 if binary else 2) or args.p < 1:
        raise UsageError(f"need --n >= {4 if binary else 2} and --p >= 1")
    os.makedirs(args.out, exist_ok=True)
    ids = [str(i + 1) for i in range(args.n)]
    if binary:
        if not 0 < args.imbalance < 1:
            raise UsageError("--imbalance must be in (0, 1)")
        X, y = binary_unbalanced(args.n, args.p, args.imbalance, args.seed,
                                 margin=args.margin)
        with open(os.path.join(args.out, "labels.csv"), "w", newline="") as fh:
            _io.write_labels(y, ids, fh)
    elif kind in ("changepoint", "changepoint_nonmono"):
        X, model = changepoint_nonmono(args.n, args.p, args.seed)
        model = type(model)(model.value, model.delta_fp, model.delta_fn,
                            model.example, model.n_examples, tuple(ids))
        with open(os.path.join(args.out, "breakpoints.csv"), "w", newline="") as fh:
            write_breakpoints(model, fh)
    else:
        raise UsageError(f"unknown kind {args.kind!r}")
    with open(os.path.join(args.out, "features.csv"), "w", newline="") as fh:
        _io.write_features(X, ids, fh)


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def cmd_bench(args):
    sizes = _int_list(args.sizes)
    if not sizes or sizes != sorted(sizes) or min(sizes) < 4:
        raise UsageError("--sizes must be ascending integers >= 4")
    seeds = range(args.seeds) if args.seed_list is None else _int_list(args.seed_list)
    variants = [_variant(v) for v in args.variants.split(",")]
    for v in variants:
        if v not in ("first_min", "linear", "quadratic", "grid"):
            raise UsageError(f"unsupported bench variant {v!r}")
    rows = _bench.bench(sizes, seeds, variants, jobs=args.jobs, p=args.p,
                        imbalance=args.imbalance, max_steps=args.max_steps,
                        aum_tolerance=args.aum_tol, record_time=not args.no_timing)
    with _output(args.out) as fh:
        _bench.write_bench(rows, fh)


def _add_problem(sp, with_vectors=True):
    sp.add_argument("--features", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--breakpoints")
    if with_vectors:
        sp.add_argument("--weights", help="single-column 'value' CSV; default zeros")
        sp.add_argument("--direction",
                        help="single-column 'value' CSV; default negative AUM gradient")


def build_parser():
    parser = argparse.ArgumentParser(prog="aumline", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("path", help="exact AUM/AUC path along one direction")
    _add_problem(sp)
    sp.add_argument("--variant", default="first-min",
                    choices=["first-min", "linear", "quadratic", "max-auc",
                             "max-auc-validation"])
    sp.add_argument("--max-events", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_path)

    sp = sub.add_parser("oracle", help="AUM/AUC recomputed at given step sizes")
    _add_problem(sp)
    sp.add_argument("--steps", required=True, help="comma-separated step sizes")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("train", help="gradient descent with line search")
    _add_problem(sp, with_vectors=False)
    sp.add_argument("--variant", default="first-min",
                    choices=["first-min", "linear", "quadratic", "max-auc-validation", "grid"])
    sp.add_argument("--validation-fraction", type=float, default=0.25)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-steps", type=int, default=100)
    sp.add_argument("--aum-tol", type=float, default=1e-3)
    sp.add_argument("--grid", help="comma-separated steps for --variant grid")
    sp.add_argument("--init", choices=["gaussian", "zeros"], default="gaussian")
    sp.add_argument("--init-scale", type=float, default=1.0)
    sp.add_argument("--no-timing", action="store_true",
                    help="write elapsed_ns as 0 so output is reproducible")
    sp.add_argument("--out")
    sp.add_argument("--weights-out")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("synth", help="write a synthetic problem")
    sp.add_argument("--kind", required=True,
                    choices=["binary", "binary_unbalanced", "changepoint", "changepoint_nonmono"])
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, default=5)
    sp.add_argument("--imbalance", type=float, default=0.1)
    sp.add_argument("--margin", type=float, help="make binary data separable")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bench", help="events per step and steps versus n")
    sp.add_argument("--sizes", default="50,100,200,400,800")
    sp.add_argument("--seeds", type=int, default=4)
    sp.add_argument("--seed-list")
    sp.add_argument("--variants", default="first-min,linear")
    sp.add_argument("--p", type=int, default=10)
    sp.add_argument("--imbalance", type=float, default=0.1)
    sp.add_argument("--max-steps", type=int, default=1000)
    sp.add_argument("--aum-tol", type=float, default=1e-3)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--no-timing", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except _path.PathConsistencyError as err:
        print(f"aumline: internal error: {err}", file=sys.stderr)
        return 3
    except (UsageError, ParseError, ValidationError, ValueError, OSError) as err:
        print(f"aumline: error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
