"""Command-line entry point: ``dfgnn <subcommand> [options]``.

Exit codes: 0 success, 1 input error, 2 empty result, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .diagnostics import project_2d, singular_spectrum, uniformity
from .graph import GraphError
from .ingest import IngestError, dataset_stats, ingest, load_split, parse_ratings, write_split
from .losses import Batch
from .mf import MFConfig, MFDivergenceError
from .model import VARIANTS, ModelError, build_operators, forward
from .trainer import (LR_GRID, SELECTION_METRIC, InteractionIndex, NumericError, TrainConfig,
                      build_ranking_queries, evaluate_model, fit, grad_check, history_lines,
                      prepare)

log = logging.getLogger("dfgnn")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_NUMERIC = 0, 1, 2, 3


class EmptyResult(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="INI config file with [section] key = value entries")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config entry (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--task", choices=("ranking", "feedback_type"))
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def build_parser():
    parser = _Parser(prog="dfgnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="ratings file -> signed splits, key maps, stats")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "tsv"))
    p.add_argument("--delimiter", help="override the field separator (e.g. '::')")
    p.add_argument("--columns", help="user,item,rating[,timestamp] column positions")

    p = sub.add_parser("spectrum", help="frequency histograms of G+ / G- and kernel responses")
    _common(p)
    p.add_argument("--data", required=True, help="directory written by `ingest`")
    p.add_argument("--mode", choices=("energy", "amplitude"))
    p.add_argument("--subsample-users", type=int, default=None,
                   help="analyse a seeded random subset of users (for large graphs)")

    p = sub.add_parser("train", help="fit a model with early stopping")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-sweep", action="store_true", help="search the learning-rate grid")
    p.add_argument("--grad-check", action="store_true",
                   help="verify gradients on a tiny instance before training")
    p.add_argument("--no-timing", action="store_true", help="write elapsed_ms as 0")

    p = sub.add_parser("evaluate", help="score a checkpoint on a split")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "valid", "test"))

    p = sub.add_parser("ablate", help="train all four variants over several seeds")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", type=int, help="number of seeds (run.seed, run.seed+1, ...)")

    p = sub.add_parser("diagnose", help="singular spectrum, 2-D projection, uniformity")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--compare", help="second checkpoint for side-by-side output")
    p.add_argument("--which", choices=("representation", "embedding"))

    p = sub.add_parser("synth", help="write a planted two-cluster ratings CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--items", type=int, default=200)
    p.add_argument("--per-user", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg.run.seed = args.seed
    if getattr(args, "variant", None):
        cfg.model.variant = args.variant
    if getattr(args, "task", None):
        cfg.train.task = args.task
    if getattr(args, "lr", None) is not None:
        cfg.train.lr = args.lr
    if getattr(args, "seeds", None) is not None:
        cfg.run.seeds = args.seeds
    if getattr(args, "format", None):
        cfg.run.format = args.format
    if getattr(args, "delimiter", None):
        cfg.ingest.delimiter = args.delimiter
    if getattr(args, "columns", None):
        cfg.set("ingest", "columns", args.columns)
    if getattr(args, "mode", None):
        cfg.spectrum.mode = args.mode
    if getattr(args, "split", None):
        cfg.eval.split = args.split
    if getattr(args, "which", None):
        cfg.diagnose.which = args.which
    return cfg.resolve()


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def cmd_ingest(args, cfg: RunConfig):
    path = Path(args.input)
    if not path.is_file():
        raise IngestError(f"input file not found: {path}")
    with open(path, "rb") as fh:
        records = parse_ratings(fh.read(), cfg.run.format, cfg.ingest.columns, cfg.ingest.delimiter)
    try:
        split = ingest(records, cfg.ingest)
    except IngestError as exc:
        if "at least 10 records" in str(exc):
            raise EmptyResult(f"nothing left after filtering: {exc}") from None
        raise
    out = Path(args.out_dir)
    stats = write_split(split, out)
    _write_json(out / "config.json", cfg.to_dict())
    log.info("ingest: %s", stats)
    return stats


def _load_data(args):
    return load_split(args.data)


def cmd_spectrum(args, cfg: RunConfig):
    from .analysis import frequency_analysis, mf_signal
    from .spectral import kernel_response_table

    split = _load_data(args)
    sc = cfg.spectrum
    edges = split.all_edges()
    num_users, num_items = split.num_users, split.num_items
    ratings = split.ratings
    if ratings is None:
        log.warning("no ratings.tsv; fitting MF to sign values")
        ratings = edges.astype(np.float64)
    if args.subsample_users:
        rng = np.random.default_rng(cfg.run.seed)
        keep = np.sort(rng.choice(num_users, min(args.subsample_users, num_users), replace=False))
        edges, ratings, num_users, num_items = _subsample(edges, ratings, keep)
    n = num_users + num_items
    if n > sc.max_nodes:
        raise IngestError(f"graph has {n} nodes, above the dense eigensolver cap "
                          f"({sc.max_nodes}); rerun with --subsample-users")
    signal = mf_signal(ratings, num_users, num_items,
                       MFConfig(sc.mf_lr, sc.mf_reg, sc.mf_epochs, cfg.run.seed, center=sc.center))
    res = frequency_analysis(num_users, num_items, edges, signal, sc.buckets, sc.mode, sc.max_nodes)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hp, hn = res[1].histogram, res[-1].histogram
    _write_csv(out / "frequency_histogram.csv",
               ["bucket_low", "bucket_high", "mass_positive_graph", "mass_negative_graph"],
               [(round(hp.bucket_edges[b], 12), round(hp.bucket_edges[b + 1], 12), hp.mass[b], hn.mass[b])
                for b in range(sc.buckets)])
    _write_csv(out / "kernel_response.csv", ["lambda", "lgf_gain", "hgf_gain"],
               kernel_response_table(sc.kernel_layers, sc.step))
    # one value per line, row k is unified node k
    _write_csv(out / "signal.csv", ["signal"], ([v] for v in signal))
    summary = {
        "num_nodes": n,
        "positive": {"num_edges": res[1].num_edges, "mean_frequency": _finite(res[1].mean_frequency),
                     "smoothness": res[1].smoothness, "empty": hp.zero_signal},
        "negative": {"num_edges": res[-1].num_edges, "mean_frequency": _finite(res[-1].mean_frequency),
                     "smoothness": res[-1].smoothness, "empty": hn.zero_signal},
        "config": cfg.to_dict(),
    }
    _write_json(out / "spectrum.json", summary)
    return summary


def _finite(x):
    return float(x) if np.isfinite(x) else None


def _subsample(edges, ratings, keep_users):
    mask = np.isin(edges[:, 0], keep_users)
    edges = edges[mask]
    rmask = np.isin(ratings[:, 0].astype(np.int64), keep_users)
    ratings = ratings[rmask].copy()
    umap = {int(u): k for k, u in enumerate(keep_users)}
    items = np.unique(edges[:, 1])
    imap = {int(i): k for k, i in enumerate(items)}
    edges = np.array([(umap[int(u)], imap[int(i)], s) for u, i, s in edges], dtype=np.int64).reshape(-1, 3)
    ratings = np.array([(umap[int(u)], imap[int(i)], r) for u, i, r in ratings
                        if int(i) in imap], dtype=np.float64).reshape(-1, 3)
    return edges, ratings, len(keep_users), len(items)


def _tiny_grad_check(cfg: RunConfig):
    """Gradient check on a 5-user, 6-item random instance with the run's variant."""
    from .graph import build_graph
    from .losses import LossConfig
    from .model import ModelConfig, init_model

    rng = np.random.default_rng(cfg.run.seed)
    pairs = rng.choice(30, size=14, replace=False)
    edges = [(int(p // 6), int(p % 6), int(rng.choice([1, -1]))) for p in pairs]
    g = build_graph(5, 6, edges)
    mc = ModelConfig(embed_dim=3, num_layers=min(cfg.model.num_layers, 2),
                     activation=cfg.model.activation, variant=cfg.model.variant,
                     seed=cfg.run.seed, share_weights=cfg.model.share_weights)
    model = init_model(mc, 11)
    ops = build_operators(g, mc.variant)
    batch = Batch(5, np.array([0, 1, 2, 3, 4, 0]), np.array([0, 1, 2, 3, 4, 5]),
                  np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0]), g.pos_edges, g.neg_edges)
    lc = LossConfig(cfg.loss.tau, max(cfg.loss.w, 0.5), "exact", cfg.loss.normalize)
    return grad_check(model, ops, batch, lc)


def cmd_train(args, cfg: RunConfig):
    split = _load_data(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.grad_check:
        report = _tiny_grad_check(cfg)
        for line in report.lines():
            log.info("grad-check %s", line)
        if not report.passed:
            raise NumericError(f"gradient check failed for {', '.join(report.failed)}")
    data = prepare(split, cfg.model.variant)
    lrs = LR_GRID if args.lr_sweep else (cfg.train.lr,)
    best, sweep = None, []
    for lr in lrs:
        tc = TrainConfig(**{**cfg.train.__dict__, "lr": lr})
        result = fit(split, cfg.model, tc, cfg.loss, data=data)
        sweep.append({"lr": lr, "best_val_metric": result.checkpoint.best_metric,
                      "best_epoch": result.checkpoint.epoch})
        if best is None or result.checkpoint.best_metric > best[1].checkpoint.best_metric:
            best = (lr, result)
    lr, result = best
    ckpt = result.checkpoint
    ckpt.meta.update({"lr": lr, "config_digest": cfg.digest()})
    save_checkpoint(ckpt, out / "checkpoint.dfgn")
    (out / "history.jsonl").write_text(history_lines(result.history, timing=not args.no_timing),
                                       encoding="utf-8")
    report = _evaluate(ckpt, split, data.ops, cfg, "valid")
    if args.lr_sweep:
        report["lr_sweep"] = sweep
    _write_json(out / "report_valid.json", report)
    return report


def _evaluate(ckpt, split, ops, cfg: RunConfig, which: str):
    model = ckpt.model
    if model.num_nodes != split.num_users + split.num_items:
        raise CheckpointError(f"checkpoint has {model.num_nodes} nodes but the data has "
                              f"{split.num_users + split.num_items}")
    task = ckpt.meta.get("task", cfg.train.task)
    edges = getattr(split, which)
    h, _ = forward(model, ops)
    if task == "ranking":
        known = InteractionIndex(split.all_edges(), split.num_items)
        queries = build_ranking_queries(edges, known, split.num_items, cfg.eval.num_negatives,
                                        cfg.run.seed + 2)
        if queries.users.shape[0] == 0:
            raise EmptyResult(f"no positive edges in the {which} split")
        metrics = evaluate_model(h, split.num_users, task, queries=queries, ks=cfg.eval.ks)
        count = {"num_queries": int(queries.users.shape[0])}
    else:
        if len(edges) == 0:
            raise EmptyResult(f"empty {which} split")
        metrics = evaluate_model(h, split.num_users, task, edges, threshold=cfg.eval.threshold)
        count = {"num_examples": int(len(edges))}
    return {"task": task, "split": which, "metrics": metrics, **count, "seed": cfg.run.seed,
            "variant": model.config.variant, "config_digest": cfg.digest(),
            "config": cfg.to_dict()}


def _checkpoint_config(ckpt, cfg: RunConfig):
    cfg.model = ckpt.model.config
    if "task" in ckpt.meta:
        cfg.train.task = ckpt.meta["task"]
    return cfg


def cmd_evaluate(args, cfg: RunConfig):
    split = _load_data(args)
    ckpt = load_checkpoint(args.checkpoint)
    cfg = _checkpoint_config(ckpt, cfg)
    data = prepare(split, ckpt.model.config.variant)
    report = _evaluate(ckpt, split, data.ops, cfg, cfg.eval.split)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report)
    return report


def cmd_ablate(args, cfg: RunConfig):
    split = _load_data(args)
    tasks = [cfg.train.task] if args.task else ["feedback_type", "ranking"]
    seeds = [cfg.run.seed + k for k in range(cfg.run.seeds)]
    runs = []
    for variant in VARIANTS:
        data = prepare(split, variant)
        for task in tasks:
            for seed in seeds:
                run_cfg = load_config(args.config, args.set)
                run_cfg.run.seed = seed
                run_cfg.model.variant = variant
                run_cfg.train.task = task
                run_cfg.train.lr = cfg.train.lr
                run_cfg.resolve()
                result = fit(split, run_cfg.model, run_cfg.train, run_cfg.loss, data=data)
                rep = _evaluate(result.checkpoint, split, data.ops, run_cfg, run_cfg.eval.split)
                runs.append({"variant": variant, "task": task, "seed": seed,
                             "best_epoch": result.checkpoint.epoch, "metrics": rep["metrics"]})
                log.info("ablate %s %s seed=%d %s", variant, task, seed, rep["metrics"])
    table = summarize_ablation(runs, tasks)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "ablation.json", {"runs": runs, "summary": table, "seeds": seeds,
                                         "config": cfg.to_dict()})
    header = ["variant"] + [c for c in table[VARIANTS[0]]]
    _write_csv(out / "ablation.csv", header,
               [[v] + [table[v][c] for c in header[1:]] for v in VARIANTS])
    return table


def summarize_ablation(runs, tasks):
    table = {}
    for variant in VARIANTS:
        row = {}
        for task in tasks:
            sel = [r["metrics"] for r in runs if r["variant"] == variant and r["task"] == task]
            for name in sorted(sel[0]):
                vals = np.array([m[name] for m in sel])
                row[f"{task}:{name}:mean"] = float(vals.mean())
                row[f"{task}:{name}:std"] = float(vals.std())
        table[variant] = row
    return table


def _diagnose_one(ckpt, split, cfg, which):
    ops = prepare(split, ckpt.model.config.variant).ops
    if which == "embedding":
        emb = ckpt.model.params["X"]
    else:
        emb, _ = forward(ckpt.model, ops)
    return emb, singular_spectrum(emb), project_2d(emb), uniformity(emb, seed=cfg.run.seed)


def cmd_diagnose(args, cfg: RunConfig):
    split = _load_data(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [("a", args.checkpoint)] + ([("b", args.compare)] if args.compare else [])
    results = {}
    for tag, path in paths:
        if not Path(path).is_file():
            raise CheckpointError(f"checkpoint not found: {path}")
        ckpt = load_checkpoint(path)
        if ckpt.model.num_nodes != split.num_users + split.num_items:
            raise CheckpointError(f"{path}: node count does not match the data")
        emb, sv, proj, uni = _diagnose_one(ckpt, split, cfg, cfg.diagnose.which)
        suffix = "" if len(paths) == 1 else f"_{tag}"
        _write_csv(out / f"singular_spectrum{suffix}.csv", ["sigma_index", "sigma_ratio"],
                   [(k + 1, v) for k, v in enumerate(sv)])
        kinds = ["user"] * split.num_users + ["item"] * split.num_items
        _write_csv(out / f"projection{suffix}.csv", ["node_id", "x", "y", "node_type"],
                   [(k, proj[k, 0], proj[k, 1], kinds[k]) for k in range(proj.shape[0])])
        results[tag] = {"checkpoint": str(path), "variant": ckpt.model.config.variant,
                        "uniformity": uni, "singular_ratios": sv.tolist()}
    if len(paths) == 2:
        a, b = results["a"]["singular_ratios"], results["b"]["singular_ratios"]
        _write_csv(out / "singular_spectrum_compare.csv",
                   ["sigma_index", "sigma_ratio_a", "sigma_ratio_b"],
                   [(k + 1, a[k], b[k]) for k in range(min(len(a), len(b)))])
    report = {"which": cfg.diagnose.which, "results": results, "config": cfg.to_dict()}
    _write_json(out / "diagnostics.json", report)
    return report


def cmd_synth(args):
    from .synthetic import planted_ratings, write_ratings_csv

    records, _, _ = planted_ratings(args.users, args.items, 2, args.per_user, args.noise, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_ratings_csv(records, args.out)
    return {"records": len(records)}


COMMANDS = {"ingest": cmd_ingest, "spectrum": cmd_spectrum, "train": cmd_train,
            "evaluate": cmd_evaluate, "ablate": cmd_ablate, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            cmd_synth(args)
            return EXIT_OK
        cfg = resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except EmptyResult as exc:
        print(f"dfgnn {args.command}: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (NumericError, MFDivergenceError, FloatingPointError) as exc:
        print(f"dfgnn {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, IngestError, GraphError, CheckpointError, ModelError,
            OSError, ValueError) as exc:
        print(f"dfgnn {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
