"""Command-line front end.

Subcommands: ``prepare``, ``train``, ``evaluate``, ``predict``, ``reconstruct``.
Settings resolve as defaults < ``--config`` file < command-line flags.
Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .dataio import DataError
from .graph import make_mf_split, make_vgae_split
from .harness import (NumericError, TrainConfig, aggregate, default_split,
                      run_link_prediction, run_multitask, run_node_classification,
                      run_reconstruction)
from .metrics import accuracy, average_precision, roc_auc
from .model import predict_proba_classes, score_pairs
from .numeric import make_rng

log = logging.getLogger("longae")

DATA_DIR_ENV = "LONGAE_DATA_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ------------------------------------------------------------- arguments

def _add_dataset_args(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--dataset", help=f"dataset directory name under --data-dir (or ${DATA_DIR_ENV})")
    g.add_argument("--data-dir", help="root holding <dataset>/edges.tsv, features.tsv, labels.tsv")
    g.add_argument("--edges", help="edge list file (overrides --dataset)")
    g.add_argument("--feature-file", help="node feature file")
    g.add_argument("--label-file", help="node label file")
    g.add_argument("--rescale-features", action="store_true", help="min-max rescale features into [0, 1]")


def _add_train_args(p):
    g = p.add_argument_group("training")
    S = argparse.SUPPRESS
    g.add_argument("--config", help="file of 'key = value' lines")
    g.add_argument("--task", default=S, help="lp | nc | mt | reconstruct")
    g.add_argument("--features", dest="use_features", action="store_true", default=S,
                   help="concatenate node features to adjacency rows")
    g.add_argument("--no-features", dest="use_features", action="store_false", default=S)
    g.add_argument("--epochs", type=int, default=S)
    g.add_argument("--batch-size", type=int, default=S)
    g.add_argument("--input-dropout", type=float, default=S)
    g.add_argument("--hidden-dropout", type=float, default=S)
    g.add_argument("--lr", type=float, default=S)
    g.add_argument("--patience", type=int, default=S)
    g.add_argument("--seed", type=int, default=S)
    g.add_argument("--split-seed", type=int, default=S)
    g.add_argument("--test-frac", type=float, default=S)
    g.add_argument("--val-frac", type=float, default=S)
    g.add_argument("--zeta-mode", choices=("global", "per_row"), default=S)
    g.add_argument("--symmetrize-scores", dest="symmetrize_scores", action="store_true", default=S)
    g.add_argument("--no-symmetrize-scores", dest="symmetrize_scores", action="store_false", default=S)
    g.add_argument("--hidden", type=int, default=S)
    g.add_argument("--latent", type=int, default=S)
    g.add_argument("--mvn", dest="mvn", action="store_true", default=S)
    g.add_argument("--no-mvn", dest="mvn", action="store_false", default=S)
    g.add_argument("--untied", dest="tied", action="store_false", default=S)
    g.add_argument("--precision", type=int, choices=(32, 64), default=S)
    g.add_argument("--feature-reduction", choices=("mean", "sum"), default=S)
    g.add_argument("--repeats", type=int, default=S)


def build_parser():
    parser = _Parser(prog="longae", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("prepare", help="build and save an edge split")
    _add_dataset_args(p)
    p.add_argument("--protocol", choices=("vgae", "mf"), default="vgae")
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--val-frac", type=float, default=0.05)
    p.add_argument("--train-frac", type=float, default=0.1, help="mf protocol: fraction kept for training")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="split file to write")

    p = sub.add_parser("train", help="train a model and write checkpoint + report")
    _add_dataset_args(p)
    _add_train_args(p)
    p.add_argument("--split", help="split file from 'prepare' (default: generated from --split-seed)")
    p.add_argument("--checkpoint", default="model.ckpt")
    p.add_argument("--report", default="report.txt")
    p.add_argument("--scores", help="also write test-pair scores here")

    p = sub.add_parser("evaluate", help="score a checkpoint on held-out data")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", help="split file (default: the one recorded at training time)")
    p.add_argument("--report", default="eval_report.txt")

    p = sub.add_parser("predict", help="score node pairs with a checkpoint")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", required=True, help="file of 'a<TAB>b' node-id pairs")
    p.add_argument("--split", help="split file (default: the one recorded at training time)")
    p.add_argument("--out", default="scores.tsv")

    p = sub.add_parser("reconstruct", help="precision@k reconstruction experiment")
    _add_dataset_args(p)
    _add_train_args(p)
    p.add_argument("--remove-frac", type=float, default=0.0)
    p.add_argument("--k-grid", default="100,1000,10000", help="comma-separated ascending k values")
    p.add_argument("--checkpoint", default="model.ckpt")
    p.add_argument("--report", default="report.txt")
    p.add_argument("--curve", default="precision_at_k.tsv")
    return parser


# ----------------------------------------------------------- resolution

def read_config_file(path):
    out = {}
    for lineno, line in dataio._lines(path):
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError("expected 'key = value'", path, lineno)
        key = key.strip().replace("-", "_")
        if key not in TrainConfig.field_names():
            raise DataError(f"unknown config key {key!r}", path, lineno)
        out[key] = value.strip()
    return out


def _coerce(name, value):
    default = TrainConfig.__dataclass_fields__[name].default
    if not isinstance(value, str):
        return value
    if isinstance(default, bool):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {value!r}")
    if isinstance(default, int) or name in ("epochs", "batch_size"):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def resolve_config(args, task=None):
    settings = {}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for name in TrainConfig.field_names():
        if hasattr(args, name):
            settings[name] = getattr(args, name)
    if task is not None:
        settings["task"] = task
    settings = {k: _coerce(k, v) for k, v in settings.items()}
    return TrainConfig(**settings)


def _dataset_paths(args, sources=None):
    if args.edges:
        return args.edges, args.feature_file, args.label_file
    if args.dataset:
        root = Path(args.data_dir or os.environ.get(DATA_DIR_ENV, "data")) / args.dataset
        if not (root / "edges.tsv").exists():
            raise DataError(f"no edges.tsv under {root}")
        feat = args.feature_file or (root / "features.tsv" if (root / "features.tsv").exists() else None)
        lab = args.label_file or (root / "labels.tsv" if (root / "labels.tsv").exists() else None)
        return root / "edges.tsv", feat, lab
    if sources:
        return sources["edges"], sources.get("features"), sources.get("labels")
    raise UsageError("give --dataset or --edges")


def load_bundle(args, sources=None, rescale=False):
    edges, feats, labels = _dataset_paths(args, sources)
    try:
        return dataio.load_dataset(edges, feats, labels, rescale=args.rescale_features or rescale)
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {exc.filename}") from None


def _split_for(bundle, cfg, split_path):
    if split_path:
        split = dataio.read_split(split_path)
        n = bundle.n
        for arr in split.sections().values():
            if len(arr) and (arr[:, :2].max() >= n):
                raise DataError(f"split references node index >= {n}", split_path)
        return split
    return default_split(bundle, cfg)


# ------------------------------------------------------------- commands

def cmd_prepare(args):
    bundle = load_bundle(args)
    rng = make_rng(args.split_seed)
    if args.protocol == "vgae":
        _, split = make_vgae_split(bundle.adjacency, args.test_frac, args.val_frac, rng, seed=args.split_seed)
    else:
        _, split = make_mf_split(bundle.adjacency, args.train_frac, rng, seed=args.split_seed)
    dataio.write_split(split, args.out)
    log.info("dataset stats %s", json.dumps(bundle.stats, sort_keys=True))
    log.info("wrote %s split (seed %d) to %s", args.protocol, args.split_seed, args.out)
    return EXIT_OK


def _meta(cfg, bundle, split_path, rescale):
    return {"config": cfg.as_dict(), "sources": bundle.sources, "rescale": bool(rescale),
            "split": str(split_path) if split_path else None}


def _per_seed_path(path, seed, repeats):
    if repeats == 1:
        return path
    p = Path(path)
    return p.with_name(f"{p.stem}.seed{seed}{p.suffix}")


def cmd_train(args):
    cfg = resolve_config(args)
    if cfg.task == "reconstruct":
        args.remove_frac, args.k_grid, args.curve = 0.0, "100,1000,10000", "precision_at_k.tsv"
        return cmd_reconstruct(args, cfg)
    log.info("resolved config %s", json.dumps(cfg.as_dict(), sort_keys=True))
    bundle = load_bundle(args)
    split = None if cfg.task == "node_classify" else _split_for(bundle, cfg, args.split)
    reports = []
    for r in range(cfg.repeats):
        run_cfg = TrainConfig(**{**cfg.as_dict(), "seed": cfg.seed + r})
        log.info("run %d/%d seed %d", r + 1, cfg.repeats, run_cfg.seed)
        if cfg.task == "link_predict":
            report, params = run_link_prediction(bundle, split, run_cfg)
        elif cfg.task == "node_classify":
            report, params = run_node_classification(bundle, run_cfg)
        else:
            report, params = run_multitask(bundle, split, run_cfg)
        dataio.save_checkpoint(params, _per_seed_path(args.checkpoint, run_cfg.seed, cfg.repeats),
                               _meta(run_cfg, bundle, args.split, args.rescale_features))
        reports.append(report)
        if args.scores and split is not None:
            pairs, _ = split.eval_pairs("test")
            adj = split.training_adjacency(bundle.adjacency)
            feats = bundle.features if cfg.use_features else None
            scores = score_pairs(params, adj, feats, pairs, cfg.symmetrize_scores, run_cfg.model_config())
            named = [(bundle.node_ids[i], bundle.node_ids[j]) for i, j in pairs]
            dataio.write_scores(_per_seed_path(args.scores, run_cfg.seed, cfg.repeats), named, scores)
    dataio.write_report(args.report, aggregate(reports))
    log.info("wrote report to %s", args.report)
    return EXIT_OK


def _load_model(args):
    params, meta = dataio.load_checkpoint(args.checkpoint)
    cfg = TrainConfig(**meta["config"])
    bundle = load_bundle(args, meta.get("sources"), meta.get("rescale", False))
    n_feat = bundle.features.f if (cfg.use_features and bundle.features is not None) else 0
    if params.n_nodes != bundle.n or params.n_features != n_feat:
        raise dataio.DimensionMismatchError(
            f"checkpoint expects {params.n_nodes} nodes + {params.n_features} features, "
            f"dataset gives {bundle.n} + {n_feat}", args.checkpoint)
    return params, meta, cfg, bundle


def _view(bundle, cfg, meta, split_path):
    """Adjacency and features the model saw as input during training."""
    feats = bundle.features if cfg.use_features else None
    if cfg.task == "node_classify":
        return bundle.adjacency, feats, None
    split = _split_for(bundle, cfg, split_path or meta.get("split"))
    return split.training_adjacency(bundle.adjacency), feats, split


def cmd_evaluate(args):
    params, meta, cfg, bundle = _load_model(args)
    adj, feats, split = _view(bundle, cfg, meta, args.split)
    mcfg = cfg.model_config()
    report = {"task": cfg.task, "seed": cfg.seed}
    if split is not None:
        pairs, labels = split.eval_pairs("test")
        scores = score_pairs(params, adj, feats, pairs, cfg.symmetrize_scores, mcfg)
        report["test_auc"] = roc_auc(scores, labels)
        report["test_ap"] = average_precision(scores, labels)
    if params.has_classifier and bundle.labels is not None:
        nodes = bundle.labels.nodes("test")
        probs = predict_proba_classes(params, adj, feats, nodes, mcfg)
        report["test_accuracy"] = accuracy(probs.argmax(axis=1), bundle.labels.labels[nodes])
    dataio.write_report(args.report, report)
    return EXIT_OK


def cmd_predict(args):
    params, meta, cfg, bundle = _load_model(args)
    adj, feats, _ = _view(bundle, cfg, meta, args.split)
    named = dataio.read_pairs(args.pairs)
    idx = np.asarray([(bundle.index_of(a), bundle.index_of(b)) for a, b in named], dtype=np.int64)
    scores = score_pairs(params, adj, feats, idx.reshape(-1, 2), cfg.symmetrize_scores, cfg.model_config())
    dataio.write_scores(args.out, named, scores)
    log.info("wrote %d scores to %s", len(named), args.out)
    return EXIT_OK


def cmd_reconstruct(args, cfg=None):
    cfg = cfg or resolve_config(args, task="reconstruct")
    if cfg.task != "reconstruct":
        raise UsageError("reconstruct only runs the reconstruct task")
    log.info("resolved config %s", json.dumps(cfg.as_dict(), sort_keys=True))
    try:
        k_grid = [int(k) for k in str(args.k_grid).split(",") if k.strip()]
    except ValueError:
        raise UsageError(f"--k-grid must be comma-separated integers, got {args.k_grid!r}") from None
    bundle = load_bundle(args)
    report, params, curve = run_reconstruction(bundle, args.remove_frac, k_grid, cfg)
    dataio.save_checkpoint(params, args.checkpoint, _meta(cfg, bundle, None, args.rescale_features))
    dataio.write_report(args.report, report, curve=curve, curve_path=args.curve)
    return EXIT_OK


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "evaluate": cmd_evaluate,
            "predict": cmd_predict, "reconstruct": cmd_reconstruct}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(asctime)s %(name)s %(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
