"""Command line front end: ``svmpool {synth,pool,train,eval,report}``.

Every flag can also be set through an environment variable named
``SVMPOOL_<FLAG>`` (upper case, dashes as underscores), e.g.
``SVMPOOL_C2=1``. Explicit flags win over the environment.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Failures print one JSON object with the error category on stderr.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .dataio import (
    SyntheticSpec,
    atomic_write_bytes,
    import_table,
    load_dataset,
    sample_bag,
    save_dataset,
    synthesize,
    write_container,
)
from .errors import InvalidConfig, SVMPoolError
from .evaluation import (
    PIPELINES,
    EvalConfig,
    Timer,
    cross_validate,
    fit_model,
    nsvmp_matrix,
    predict_model,
    resolve_gamma,
    svmp_matrix,
)
from .fusion import FusedKernelConfig
from .kernel import HomogeneousMapConfig, KernelSpec
from .mil_pool import NegativeBag, PoolConfig, centralize, global_mean
from .model import load_model, save_model

ENV_PREFIX = "SVMPOOL_"
EXIT_CODES = {"usage": 2, "data": 3, "numerical": 4}
DESCRIPTOR_MAGIC = "SVMPDESC"
DESCRIPTOR_VERSION = 1


# ------------------------------------------------------------------ parser

def _pool_flags(p):
    g = p.add_argument_group("pooling")
    g.add_argument("--eta", type=float, default=0.9, help="target positive fraction per bag")
    g.add_argument("--c-init", type=float, default=1e-4)
    g.add_argument("--c-growth", type=float, default=10.0)
    g.add_argument("--c-cap", type=float, default=1e4)
    g.add_argument("--c-fixed", type=float, default=None, help="single solve at this C")
    g.add_argument("--gamma", type=float, default=None,
                   help="rbf bandwidth; median heuristic when omitted")
    g.add_argument("--pos-bag-size", type=int, default=25)
    g.add_argument("--neg-bag-size", type=int, default=50)


def _classifier_flags(p):
    g = p.add_argument_group("classifiers")
    g.add_argument("--c2", type=float, default=10.0)
    g.add_argument("--beta1", type=float, default=1.0)
    g.add_argument("--beta2", type=float, default=1.0)
    g.add_argument("--hom-order", type=int, default=3)
    g.add_argument("--max-bcd-iters", type=int, default=3)


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="threads for per-bag pooling")


def build_parser():
    parser = argparse.ArgumentParser(prog="svmpool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a planted-signal dataset (or convert a table)")
    p.add_argument("--out", required=True, help="manifest path (.json)")
    p.add_argument("--from-table", default=None, help="import this feature table instead")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--rho", type=float, default=0.2, help="informative fraction")
    p.add_argument("--signal", type=float, default=SyntheticSpec.signal_strength)
    p.add_argument("--noise", type=float, default=SyntheticSpec.noise_sigma)
    p.add_argument("--pos-bag-size", type=int, default=25)
    p.add_argument("--neg-bag-size", type=int, default=50)
    _common(p)

    p = sub.add_parser("pool", help="pool every bag into a descriptor file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kernel", choices=("linear", "rbf"), default="linear",
                   help="linear gives SVMP descriptors, rbf gives NSVMP")
    _pool_flags(p)
    _common(p)

    p = sub.add_parser("train", help="fit a pipeline on a whole dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pipeline", choices=PIPELINES, default="fused")
    _pool_flags(p)
    _classifier_flags(p)
    _common(p)

    p = sub.add_parser("eval", help="k-fold evaluation, or score a saved model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pipeline", choices=PIPELINES, default="svmp")
    p.add_argument("--model", default=None, help="score this model instead of cross-validating")
    p.add_argument("--folds", type=int, default=3)
    _pool_flags(p)
    _classifier_flags(p)
    _common(p)

    p = sub.add_parser("report", help="compare pooling baselines side by side")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pipelines", default="avg,max,svmp,nsvmp,fused")
    p.add_argument("--eta-sweep", default=None,
                   help="comma-separated eta values; adds an SVMP accuracy series")
    p.add_argument("--folds", type=int, default=3)
    _pool_flags(p)
    _classifier_flags(p)
    _common(p)
    return parser


def apply_env(parser, environ=None):
    """Replace flag defaults by ``SVMPOOL_*`` environment values."""
    environ = os.environ if environ is None else environ
    subs = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    parsers = [parser] + [p for s in subs for p in s.choices.values()]
    for p in parsers:
        for action in p._actions:
            longs = [o for o in action.option_strings if o.startswith("--")]
            if not longs or action.dest in ("help", "version"):
                continue
            key = ENV_PREFIX + longs[0][2:].upper().replace("-", "_")
            if key not in environ:
                continue
            raw = environ[key]
            try:
                value = action.type(raw) if action.type is not None else raw
            except (TypeError, ValueError) as exc:
                raise InvalidConfig(f"{key}={raw!r}: {exc}") from exc
            if action.choices is not None and value not in action.choices:
                raise InvalidConfig(f"{key}={raw!r} not in {sorted(action.choices)}")
            action.default = value
            action.required = False


# ---------------------------------------------------------- config plumbing

def _positive_int(args, *names):
    for name in names:
        if getattr(args, name) < 1:
            raise InvalidConfig(f"--{name.replace('_', '-')} must be >= 1")


def pool_config(args, kernel=None):
    return PoolConfig(eta=args.eta, c_init=args.c_init, growth=args.c_growth,
                      c_cap=args.c_cap, c_fixed=args.c_fixed, kernel=kernel)


def eval_config(args):
    if args.hom_order < 1:
        raise InvalidConfig("--hom-order must be >= 1")
    if args.gamma is not None and not args.gamma > 0:
        raise InvalidConfig("--gamma must be positive")
    if not args.c2 > 0:
        raise InvalidConfig("--c2 must be positive")
    _positive_int(args, "max_bcd_iters", "jobs")
    fusion = FusedKernelConfig(beta1=args.beta1, beta2=args.beta2,
                               nsvmp_map=HomogeneousMapConfig(order=args.hom_order))
    return EvalConfig(pool=pool_config(args), c2=args.c2, fusion=fusion,
                      nsvmp_gamma=args.gamma, max_bcd_iters=args.max_bcd_iters,
                      jobs=args.jobs)


def resize_bags(ds, pos_n, neg_n, seed):
    """Resample bags whose size differs from the requested one.

    Bags that already have the requested size are kept unchanged, so a
    synthesized dataset passes through untouched.
    """
    seqs = [
        b if b.n == pos_n else
        sample_bag(b.frames, pos_n, [seed, i], b.sequence_id, b.label)
        for i, b in enumerate(ds.sequences)
    ]
    neg = ds.negative
    if neg.frames.shape[0] != neg_n:
        frames = sample_bag(neg.frames, neg_n, [seed, len(seqs)]).frames
        neg = NegativeBag(frames, neg.source_tag)
    return replace(ds, sequences=seqs, negative=neg)


def _load(args):
    ds = load_dataset(args.data)
    return resize_bags(ds, args.pos_bag_size, args.neg_bag_size, args.seed)


def _dataset_info(ds):
    return {"provenance": ds.provenance, "sequences": len(ds), "dimension": ds.p,
            "class_count": ds.class_count, "negative_frames": int(ds.negative.frames.shape[0])}


def _bag_flags(args):
    return {"pos_bag_size": args.pos_bag_size, "neg_bag_size": args.neg_bag_size,
            "seed": args.seed}


def _dump(obj):
    return (json.dumps(obj, indent=1, sort_keys=True) + "\n").encode()


def _write_report(path, report, timings):
    """Primary report plus a timings sidecar, so the report itself is reproducible."""
    atomic_write_bytes(path, _dump(report))
    atomic_write_bytes(str(path) + ".timings.json",
                       _dump({k: round(v, 6) for k, v in sorted(timings.items())}))


def _metrics(labels, pred, d):
    confusion = np.zeros((d, d), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    rows = confusion.sum(axis=1)
    return {
        "overall_accuracy": float(np.trace(confusion) / max(confusion.sum(), 1)),
        "per_class_accuracy": [float(confusion[i, i] / rows[i]) if rows[i] else None
                               for i in range(d)],
        "confusion": confusion.tolist(),
    }


def _cv_block(res):
    return {
        "fold_accuracies": res.fold_accuracies,
        "mean_accuracy": res.mean_accuracy,
        "overall_accuracy": res.overall_accuracy,
        "per_class_accuracy": [None if np.isnan(a) else a for a in res.per_class_accuracy],
        "confusion": res.confusion.tolist(),
    }


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    _positive_int(args, "pos_bag_size", "neg_bag_size")
    if args.from_table:
        ds = import_table(args.from_table)
    else:
        spec = SyntheticSpec(class_count=args.classes, sequences_per_class=args.per_class,
                             frames_per_sequence=args.pos_bag_size, dimension=args.dim,
                             informative_fraction=args.rho, signal_strength=args.signal,
                             noise_sigma=args.noise, negative_frame_count=args.neg_bag_size,
                             seed=args.seed)
        ds = synthesize(spec)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} sequences (p={ds.p}) to {args.out}")


def cmd_pool(args):
    _positive_int(args, "pos_bag_size", "neg_bag_size", "jobs")
    if args.gamma is not None and not args.gamma > 0:
        raise InvalidConfig("--gamma must be positive")
    pool_config(args)  # validate before touching data
    ds = _load(args)
    mu = global_mean(ds)
    ds = centralize(ds, mu)
    if args.kernel == "rbf":
        gamma = args.gamma if args.gamma is not None else resolve_gamma(
            ds, EvalConfig(), args.seed)
        cfg = pool_config(args, KernelSpec("rbf", gamma))
        D, descs = nsvmp_matrix(ds, cfg, args.jobs)
    else:
        cfg = pool_config(args)
        D, descs = svmp_matrix(ds, cfg, args.jobs)
    resolved = {"command": "pool", "data": str(args.data), "kind": args.kernel,
                "pool": cfg.to_dict(), **_bag_flags(args)}
    header = {"config": resolved, "dataset": _dataset_info(ds),
              "sequence_ids": [b.sequence_id for b in ds.sequences]}
    write_container(args.out, DESCRIPTOR_MAGIC, DESCRIPTOR_VERSION, header, {
        "descriptors": D,
        "labels": ds.labels,
        "satisfied": np.array([d.satisfied for d in descs]),
        "final_C": np.array([d.final_C for d in descs]),
        "achieved_fraction": np.array([d.achieved_fraction for d in descs]),
        "center": mu,
    })
    print(json.dumps(resolved, sort_keys=True))


def cmd_train(args):
    _positive_int(args, "pos_bag_size", "neg_bag_size", "jobs")
    cfg = eval_config(args)
    ds = _load(args)
    timer = Timer()
    model = fit_model(ds, args.pipeline, cfg, timer, args.seed)
    save_model(model, args.out)
    print(f"trained {args.pipeline} on {len(ds)} sequences -> {args.out}")


def cmd_eval(args):
    _positive_int(args, "pos_bag_size", "neg_bag_size", "jobs")
    cfg = eval_config(args)
    if args.model is None and args.folds < 2:
        raise InvalidConfig("--folds must be >= 2")
    ds = _load(args)
    timer = Timer()
    if args.model is not None:
        model = load_model(args.model)
        pred = np.asarray(predict_model(model, ds, timer))
        report = {"config": {"command": "eval", "data": str(args.data), "model": str(args.model),
                             "pipeline": model.pipeline, "eval": model.config.to_dict(),
                             **_bag_flags(args)},
                  "dataset": _dataset_info(ds),
                  "predictions": pred.tolist(),
                  **_metrics(ds.labels, pred, ds.class_count)}
        summary = report["overall_accuracy"]
    else:
        res = cross_validate(ds, args.pipeline, cfg, args.folds, args.seed)
        timer.totals = res.timings
        report = {"config": {"command": "eval", "data": str(args.data), "pipeline": args.pipeline,
                             "folds": args.folds, "eval": cfg.to_dict(), **_bag_flags(args)},
                  "dataset": _dataset_info(ds),
                  "predictions": res.predictions.tolist(),
                  **_cv_block(res)}
        summary = report["mean_accuracy"]
    _write_report(args.out, report, timer.totals)
    print(f"{args.pipeline if args.model is None else 'model'} accuracy {summary:.4f} -> {args.out}")


def cmd_report(args):
    _positive_int(args, "pos_bag_size", "neg_bag_size", "jobs")
    cfg = eval_config(args)
    if args.folds < 2:
        raise InvalidConfig("--folds must be >= 2")
    pipelines = [p.strip() for p in args.pipelines.split(",") if p.strip()]
    bad = [p for p in pipelines if p not in PIPELINES]
    if bad or not pipelines:
        raise InvalidConfig(f"unknown pipelines {bad}; choose from {PIPELINES}")
    etas = []
    if args.eta_sweep:
        try:
            etas = [float(v) for v in args.eta_sweep.split(",") if v.strip()]
        except ValueError as exc:
            raise InvalidConfig(f"--eta-sweep: {exc}") from exc
        for e in etas:
            PoolConfig(eta=e)
    ds = _load(args)
    rows, timings = {}, {}
    for p in pipelines:
        res = cross_validate(ds, p, cfg, args.folds, args.seed)
        rows[p] = _cv_block(res)
        for k, v in res.timings.items():
            timings[f"{p}.{k}"] = v
    report = {"config": {"command": "report", "data": str(args.data), "pipelines": pipelines,
                         "folds": args.folds, "eval": cfg.to_dict(), **_bag_flags(args)},
              "dataset": _dataset_info(ds),
              "table": [{"pipeline": p, "mean_accuracy": rows[p]["mean_accuracy"],
                         "fold_accuracies": rows[p]["fold_accuracies"]} for p in pipelines],
              "details": rows}
    if etas:
        series = []
        for e in etas:
            res = cross_validate(ds, "svmp", replace(cfg, pool=replace(cfg.pool, eta=e)),
                                 args.folds, args.seed)
            series.append({"eta": e, "mean_accuracy": res.mean_accuracy})
        report["eta_sweep"] = series
    _write_report(args.out, report, timings)
    width = max(len(p) for p in pipelines)
    for p in pipelines:
        print(f"{p:<{width}}  {rows[p]['mean_accuracy']:.4f}")


COMMANDS = {"synth": cmd_synth, "pool": cmd_pool, "train": cmd_train,
            "eval": cmd_eval, "report": cmd_report}


def _fail(category, exc):
    payload = {"category": category, "error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return EXIT_CODES[category]


def main(argv=None):
    parser = build_parser()
    try:
        apply_env(parser)
    except InvalidConfig as exc:
        return _fail("usage", exc)
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        COMMANDS[args.command](args)
    except SVMPoolError as exc:
        return _fail(exc.category, exc)
    except np.linalg.LinAlgError as exc:
        return _fail("numerical", exc)
    except OSError as exc:
        return _fail("data", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
