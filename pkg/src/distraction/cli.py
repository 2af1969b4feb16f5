"""Command-line entry point: ``distraction {train,sweep,evaluate,synth}``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 sweep finished
with some failed runs, 4 every sweep run failed.
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np
import yaml

from . import data as D
from .config import load_config
from .errors import ConfigError, DataError, DistractionError, ShapeError
from .metrics import evaluate
from .model import build_model, load_checkpoint, predict_proba, save_checkpoint
from .sweep import (SweepSpec, cell_summaries, eta_correlations, load_baselines, pareto_front,
                    run_sweep, summarize, write_curve, write_points)
from .trainer import make_optimizers, train

log = logging.getLogger("distraction")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL, EXIT_FAILED = 0, 1, 2, 3, 4


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_splits(cfg, data_path=None):
    """Return (train, test) per the config's data section; ``data_path`` overrides data.path."""
    spec = cfg.synth_spec()
    if data_path is None and spec is not None:
        full = D.synth_generate(spec)
    else:
        path = data_path or (cfg.resolve(cfg.data.path) if cfg.data.path else None)
        if path is None:
            raise ConfigError("no data given: pass --data or set data.path / data.synthetic")
        full = D.load_csv(path, cfg.schema())
    return D.split(full, cfg.data.split_fraction, cfg.data.split_seed)


# -- train ----------------------------------------------------------------------

def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.train = replace(cfg.train, seed=args.seed)
    seed = cfg.train.seed
    tr, te = _load_splits(cfg, args.data)
    os.makedirs(args.out, exist_ok=True)
    ckpt_path = os.path.join(args.out, "checkpoint.json")

    start = 0
    model = build_model(cfg.model_config(tr.n_features, seed=seed))
    opt_c, opt_d = make_optimizers(model, cfg.train)
    if args.resume and os.path.exists(ckpt_path):
        model, doc = load_checkpoint(ckpt_path)
        if model.input_dim != tr.n_features:
            raise ShapeError(f"checkpoint expects {model.input_dim} features, data has {tr.n_features}")
        opt_c, opt_d = make_optimizers(model, cfg.train)
        opt_c.load_state_dict(doc["optimizers"]["classifier"])
        opt_d.load_state_dict(doc["optimizers"]["distraction"])
        start = int(doc["epochs_done"])
        log.info("resuming from epoch %d", start)

    trace_path = os.path.join(args.out, "trace.jsonl")
    trace_fh = open(trace_path, "a" if start else "w")

    def on_epoch(rec):
        trace_fh.write(json.dumps(rec.__dict__) + "\n")
        trace_fh.flush()
        log.info("epoch %d/%d bce=%.4f fair=%.4g acc=%.4f dp=%.4f", rec.epoch, cfg.train.epochs,
                 rec.classifier_loss, rec.fairness_loss, rec.train_accuracy, rec.train_dp)

    try:
        model, trace = train(model, tr, cfg.train, validation=te, optimizers=(opt_c, opt_d),
                             start_epoch=start, on_epoch=on_epoch)
    finally:
        trace_fh.close()

    save_checkpoint(ckpt_path, model, extra={
        "epochs_done": cfg.train.epochs,
        "seed": seed,
        "config": cfg.to_dict(),
        "schema": tr.schema.to_dict() if tr.schema else None,
        "encoder": tr.encoder.to_dict() if tr.encoder else None,
        "optimizers": {"classifier": opt_c.state_dict(), "distraction": opt_d.state_dict()},
        "provenance": tr.provenance,
    })
    report = evaluate(predict_proba(model, te.x), te.y, te.a)
    metrics = {"seed": seed, "split": "test", "provenance": te.provenance, "eta": cfg.train.eta,
               "metrics": report.to_dict()}
    _dump_json(os.path.join(args.out, "metrics.json"), metrics)
    sys.stdout.write(report.to_json())
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------

def _majority_accuracy(y):
    p = float(np.mean(y))
    return max(p, 1 - p)


def cmd_sweep(args):
    cfg = load_config(args.config)
    tr, te = _load_splits(cfg, args.data)
    sec = cfg.sweep
    spec = SweepSpec(model=cfg.model_config(tr.n_features), train=cfg.train, etas=sec.etas,
                     seeds=sec.seeds, workers=args.workers or sec.workers)
    result = run_sweep(spec, tr, te)
    os.makedirs(args.out, exist_ok=True)
    write_points(os.path.join(args.out, "points.csv"), result.points)

    with open(os.path.join(args.out, "failures.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "seed", "error"])
        for eta, seed, msg, _ in result.failures:
            w.writerow([eta, seed, msg])
    if not result.points:
        log.error("all %d runs failed", len(result.failures))
        return EXIT_FAILED

    front = pareto_front(result.points)
    write_points(os.path.join(args.out, "front.csv"), front)
    cells = cell_summaries(result.points)
    with open(os.path.join(args.out, "cells.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(cells[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(cells)

    baselines_path = args.baselines or (cfg.resolve(sec.baselines) if sec.baselines else None)
    baselines = load_baselines(baselines_path) if baselines_path else {}
    methods = {"distraction": result.points,
               "erm": [p for p in result.points if p.eta == 0.0]}
    acc_base = sec.acc_base if sec.acc_base is not None else _majority_accuracy(te.y)
    summary = summarize(methods, acc_base=acc_base, dp_max=sec.dp_max, baselines=baselines)
    summary["status"] = result.status
    summary["n_points"] = len(result.points)
    summary["n_failures"] = len(result.failures)
    summary["cells"] = cells
    summary["correlations"] = eta_correlations(result.points)
    _dump_json(os.path.join(args.out, "summary.json"), summary)

    curves = os.path.join(args.out, "curves")
    os.makedirs(curves, exist_ok=True)
    for name, m in summary["methods"].items():
        slug = name.replace(" (transcribed)", "-transcribed").replace(" ", "_")
        write_curve(os.path.join(curves, f"{slug}.csv"), [tuple(p) for p in m["front"]])

    if not args.no_figures:
        from .plotting import eta_figure, tradeoff_figure
        tradeoff_figure(os.path.join(args.out, "tradeoff.png"), result.points, baselines)
        eta_figure(os.path.join(args.out, "eta.png"), result.points)

    out = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    out.writerow(["eta", "n", "mean_accuracy", "mean_dp", "max_dp"])
    for c in cells:
        out.writerow([f"{c['eta']:g}", c["n"], f"{c['mean_accuracy']:.4f}", f"{c['mean_dp']:.4f}", f"{c['max_dp']:.4f}"])
    for name, m in summary["methods"].items():
        out.writerow(["aoc", name, f"{m['aoc']:.6f}"])
    return EXIT_PARTIAL if result.failures else EXIT_OK


# -- evaluate -------------------------------------------------------------------

def cmd_evaluate(args):
    model, doc = load_checkpoint(args.checkpoint)
    if args.schema:
        schema = D.load_schema(args.schema)
    elif doc.get("schema"):
        schema = D.Schema.from_dict(doc["schema"])
    else:
        raise ConfigError("checkpoint carries no schema; pass --schema")
    frame = D.read_frame(args.data)
    schema.feature_columns(list(frame.columns))
    enc = D.Encoder.from_dict(doc["encoder"]) if doc.get("encoder") else None
    if enc is None or set(enc.numeric + enc.categorical) - set(frame.columns):
        # no usable training-time encoder; encode from the file itself so a width clash is reported as such
        enc = D.fit_encoder(frame, schema)
    ds = D.encode(frame, schema, enc)
    if ds.n_features != model.input_dim:
        raise ShapeError(f"data encodes to {ds.n_features} features but the checkpoint model expects "
                         f"{model.input_dim}")
    report = evaluate(predict_proba(model, ds.x), ds.y, ds.a)
    sys.stdout.write(report.to_json())
    return EXIT_OK


# -- synth ----------------------------------------------------------------------

def cmd_synth(args):
    doc = {}
    if args.spec:
        try:
            with open(args.spec) as fh:
                doc = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ConfigError(f"spec file not found: {args.spec}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.spec}: spec must be a mapping")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.n is not None:
        doc["n"] = args.n
    spec = D.SynthSpec.from_dict(doc)
    ds = D.synth_generate(spec)
    D.write_csv(args.out, ds)
    stem = os.path.splitext(args.out)[0]
    D.save_schema(stem + ".schema.yaml", ds.schema)
    if args.oracle:
        res = D.bias_oracle(spec, n_mc=args.oracle)
        _dump_json(stem + ".oracle.json", {"spec": spec.to_dict(), "oracle": res.to_dict()})
        print(json.dumps(res.to_dict(), sort_keys=True))
    return EXIT_OK


# -- wiring ---------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="distraction", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one model and write checkpoint, trace and metrics")
    t.add_argument("--config", required=True)
    t.add_argument("--data", help="CSV path; overrides data.path in the config")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, help="overrides train.seed (also seeds initialisation)")
    t.add_argument("--resume", action="store_true", help="continue from OUT/checkpoint.json if present")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="train an eta x seed grid and summarise the trade-off")
    s.add_argument("--config", required=True)
    s.add_argument("--data")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--baselines", help="CSV of transcribed curves: method,demographic_parity,accuracy")
    s.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("evaluate", help="score a checkpoint on a CSV")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--schema")
    e.set_defaults(func=cmd_evaluate)

    g = sub.add_parser("synth", help="write a synthetic biased dataset")
    g.add_argument("--spec", help="YAML mapping of generator fields")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--oracle", type=int, metavar="N_MC", help="also write a Monte-Carlo Bayes oracle summary")
    g.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DistractionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
