"""Training loop and the four experiment protocols.

Each ``run_*`` function trains one model and returns ``(report, params)``
where ``report`` is an ordered dict of metrics. Runs are deterministic in
``(data, split, config)``: the seed feeds three independent PCG64 streams
for initialization, row shuffling and dropout.
"""
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .graph import PRESENT, make_vgae_split, augmented_batch, degrade_edges, AugmentedRow
from .losses import LossConfig, alpha_mbce, compute_zeta, mbce, multitask_loss, row_zetas
from .metrics import accuracy, average_precision, precision_at_k, rank_by_score, roc_auc
from .model import (ModelConfig, backward, forward, init_params, predict_proba_classes,
                    reconstruct_scores, score_pairs)
from .numeric import float_dtype, make_rng
from .optim import AdamState, EarlyStopping, adam_step

log = logging.getLogger("longae")

TASKS = ("reconstruct", "link_predict", "node_classify", "multitask")
TASK_ALIASES = {
    "rec": "reconstruct", "reconstruction": "reconstruct",
    "lp": "link_predict", "link": "link_predict", "link_prediction": "link_predict",
    "nc": "node_classify", "node_classification": "node_classify",
    "mt": "multitask", "mtl": "multitask", "multi_task": "multitask",
}
_TASK_DEFAULTS = {
    "reconstruct": (50, 8),
    "link_predict": (50, 8),
    "node_classify": (100, 64),
    "multitask": (100, 64),
}


class NumericError(RuntimeError):
    """Loss or metric became non-finite during training."""


def canonical_task(task):
    task = TASK_ALIASES.get(task, task)
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
    return task


@dataclass
class TrainConfig:
    task: str = "link_predict"
    use_features: bool = False
    epochs: int = None
    batch_size: int = None
    input_dropout: float = 0.2
    hidden_dropout: float = 0.5
    lr: float = 1e-3
    patience: int = 5
    seed: int = 0
    split_seed: int = 0
    test_frac: float = 0.1
    val_frac: float = 0.05
    zeta_mode: str = "global"
    symmetrize_scores: bool = True
    hidden: int = 256
    latent: int = 128
    mvn: bool = True
    tied: bool = True
    precision: int = 32
    feature_reduction: str = "mean"
    repeats: int = 1

    def __post_init__(self):
        self.task = canonical_task(self.task)
        ep, bs = _TASK_DEFAULTS[self.task]
        if self.epochs is None:
            self.epochs = ep
        if self.batch_size is None:
            self.batch_size = bs
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    @property
    def uses_input_dropout(self):
        # denoising input dropout is for link-prediction style training only
        return self.task in ("link_predict", "multitask", "reconstruct")

    def model_config(self):
        return ModelConfig(
            input_dropout=self.input_dropout if self.uses_input_dropout else 0.0,
            hidden_dropout=self.hidden_dropout,
            mvn=self.mvn,
        )

    def as_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


class Trainer:
    """Mini-batch Adam training of one autoencoder on a (masked) adjacency.

    ``train_labels`` gives a class per node, -1 where no training label is
    available; when given (with ``n_classes``) the multi-task loss is used.
    """

    def __init__(self, adj, feats, cfg, train_labels=None, n_classes=0):
        self.adj = adj
        self.feats = feats
        self.cfg = cfg
        self.dtype = float_dtype(cfg.precision)
        ss = np.random.SeedSequence(cfg.seed)
        init_ss, shuffle_ss, drop_ss = ss.spawn(3)
        self.shuffle_rng = make_rng(shuffle_ss)
        self.drop_rng = make_rng(drop_ss)
        n_feat = feats.f if feats is not None else 0
        self.params = init_params(adj.n, n_feat, make_rng(init_ss), n_classes=n_classes,
                                  hidden=cfg.hidden, latent=cfg.latent, dtype=self.dtype, tied=cfg.tied)
        self.mcfg = cfg.model_config()
        self.loss_cfg = LossConfig(zeta_mode=cfg.zeta_mode, feature_reduction=cfg.feature_reduction)
        if cfg.zeta_mode == "global":
            self.loss_cfg.zeta = compute_zeta(adj)
        self.train_labels = train_labels
        self.adam = AdamState(lr=cfg.lr)
        self.history = []

    def _batch_loss(self, idx, trace, x, a, mask):
        cfg = self.loss_cfg
        zeta = row_zetas(self.adj.entries[idx]) if cfg.zeta_mode == "per_row" else None
        n = self.adj.n
        row = AugmentedRow(a, x[:, n:], mask)
        if self.train_labels is not None:
            return multitask_loss(row, trace, self.train_labels[idx], cfg, zeta)
        if self.feats is not None:
            loss, (ga, gx) = alpha_mbce(row, trace.a_hat, trace.x_hat, cfg, zeta)
            return loss, {"a_hat": ga, "x_hat": gx}
        loss, ga = mbce(a, trace.a_hat, mask, cfg, zeta)
        return loss, {"a_hat": ga}

    def epoch(self):
        """One pass over all rows in a seeded random order; returns the mean batch loss."""
        n = self.adj.n
        order = self.shuffle_rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, self.cfg.batch_size):
            idx = order[start:start + self.cfg.batch_size]
            x, a, mask = augmented_batch(self.adj, self.feats, idx, self.dtype)
            trace = forward(self.params, x, self.drop_rng, True, self.mcfg)
            loss, grads = self._batch_loss(idx, trace, x, a, mask)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} at epoch {len(self.history) + 1}")
            adam_step(self.adam, self.params, backward(self.params, trace, grads, self.mcfg))
            total += loss
            count += 1
        return total / max(count, 1)

    def fit(self, monitor=None):
        """Train for ``cfg.epochs`` epochs, early-stopping on ``monitor(params)`` if given.

        The best-scoring parameters are restored at the end.
        """
        stopper = EarlyStopping(self.cfg.patience) if monitor is not None else None
        for ep in range(1, self.cfg.epochs + 1):
            loss = self.epoch()
            rec = {"epoch": ep, "loss": loss}
            if stopper is not None:
                metric = float(monitor(self.params))
                if not math.isfinite(metric):
                    raise NumericError(f"non-finite validation metric at epoch {ep}")
                rec["val_metric"] = metric
                self.history.append(rec)
                log.info("epoch %d loss %.6f val %.4f", ep, loss, metric)
                if stopper.check(metric, self.params) == "stop":
                    log.info("early stop at epoch %d (best epoch %d)", ep, stopper.best_epoch)
                    break
            else:
                self.history.append(rec)
                log.info("epoch %d loss %.6f", ep, loss)
        if stopper is not None:
            stopper.restore(self.params)
        self.best_epoch = stopper.best_epoch if stopper is not None else len(self.history)
        self.best_metric = stopper.best_metric if stopper is not None else float("nan")
        return self.history


def _features_for(bundle, cfg):
    if not cfg.use_features:
        return None
    if bundle.features is None:
        raise ValueError("use_features requested but the dataset has no features")
    return bundle.features


def _link_metrics(params, adj, feats, split, which, cfg):
    pairs, labels = split.eval_pairs(which)
    scores = score_pairs(params, adj, feats, pairs, cfg.symmetrize_scores, cfg.model_config())
    return roc_auc(scores, labels), average_precision(scores, labels), scores


def _has_eval(split, which):
    return len(getattr(split, f"{which}_pos")) > 0 and len(getattr(split, f"{which}_neg")) > 0


def _train_labels(labels):
    out = np.where(labels.train_mask, labels.labels, -1)
    return out.astype(np.int64)


def _class_accuracy(params, adj, feats, labels, which, mcfg):
    nodes = labels.nodes(which)
    if len(nodes) == 0:
        raise ValueError(f"no labelled {which} nodes")
    probs = predict_proba_classes(params, adj, feats, nodes, mcfg)
    return accuracy(probs.argmax(axis=1), labels.labels[nodes])


def _base_report(cfg, trainer):
    return {
        "task": cfg.task,
        "seed": cfg.seed,
        "use_features": int(cfg.use_features),
        "epochs_run": len(trainer.history),
        "best_epoch": trainer.best_epoch,
        "final_train_loss": trainer.history[-1]["loss"],
    }


def default_split(bundle, cfg):
    _, split = make_vgae_split(bundle.adjacency, cfg.test_frac, cfg.val_frac,
                               make_rng(cfg.split_seed), seed=cfg.split_seed)
    return split


def run_link_prediction(bundle, split, cfg):
    if cfg.task != "link_predict":
        raise ValueError(f"run_link_prediction called with task {cfg.task!r}")
    feats = _features_for(bundle, cfg)
    adj = split.training_adjacency(bundle.adjacency)
    trainer = Trainer(adj, feats, cfg)
    monitor = None
    if _has_eval(split, "val"):
        monitor = lambda p: _link_metrics(p, adj, feats, split, "val", cfg)[0]  # noqa: E731
    trainer.fit(monitor)
    auc, ap, _ = _link_metrics(trainer.params, adj, feats, split, "test", cfg)
    report = _base_report(cfg, trainer)
    if monitor is not None:
        report["val_auc"] = trainer.best_metric
    report["test_auc"] = auc
    report["test_ap"] = ap
    return report, trainer.params


def run_node_classification(bundle, cfg):
    if cfg.task != "node_classify":
        raise ValueError(f"run_node_classification called with task {cfg.task!r}")
    if bundle.labels is None:
        raise ValueError("node classification needs labels")
    feats = _features_for(bundle, cfg)
    labels = bundle.labels
    adj = bundle.adjacency
    trainer = Trainer(adj, feats, cfg, _train_labels(labels), len(labels.classes))
    mcfg = cfg.model_config()
    monitor = None
    if len(labels.nodes("val")):
        monitor = lambda p: _class_accuracy(p, adj, feats, labels, "val", mcfg)  # noqa: E731
    trainer.fit(monitor)
    report = _base_report(cfg, trainer)
    if monitor is not None:
        report["val_accuracy"] = trainer.best_metric
    report["test_accuracy"] = _class_accuracy(trainer.params, adj, feats, labels, "test", mcfg)
    return report, trainer.params


def run_multitask(bundle, split, cfg):
    if cfg.task != "multitask":
        raise ValueError(f"run_multitask called with task {cfg.task!r}")
    feats = _features_for(bundle, cfg)
    labels = bundle.labels
    adj = split.training_adjacency(bundle.adjacency)
    if labels is not None:
        trainer = Trainer(adj, feats, cfg, _train_labels(labels), len(labels.classes))
    else:
        trainer = Trainer(adj, feats, cfg)
    mcfg = cfg.model_config()
    has_val_nodes = labels is not None and len(labels.nodes("val")) > 0

    def monitor(p):
        total = 0.0
        if _has_eval(split, "val"):
            total += _link_metrics(p, adj, feats, split, "val", cfg)[0]
        if has_val_nodes:
            total += _class_accuracy(p, adj, feats, labels, "val", mcfg)
        return total

    use_monitor = _has_eval(split, "val") or has_val_nodes
    trainer.fit(monitor if use_monitor else None)
    auc, ap, _ = _link_metrics(trainer.params, adj, feats, split, "test", cfg)
    report = _base_report(cfg, trainer)
    if use_monitor:
        report["val_metric"] = trainer.best_metric
    report["test_auc"] = auc
    report["test_ap"] = ap
    report["link_score"] = (auc + ap) / 2.0
    if labels is not None and len(labels.nodes("test")):
        report["test_accuracy"] = _class_accuracy(trainer.params, adj, feats, labels, "test", mcfg)
    return report, trainer.params


def run_reconstruction(bundle, remove_frac, k_grid, cfg):
    """Degrade, train, and score precision@k of all dyads against the original edges.

    Validation (for early stopping) is a ``cfg.val_frac`` positive/negative
    holdout from the degraded graph; ``val_frac=0`` trains the full budget.
    """
    if cfg.task != "reconstruct":
        raise ValueError(f"run_reconstruction called with task {cfg.task!r}")
    k_grid = [int(k) for k in k_grid]
    if any(b <= a for a, b in zip(k_grid, k_grid[1:])):
        raise ValueError("k_grid must be strictly increasing")
    full = bundle.adjacency
    n = full.n
    n_dyads = n * (n - 1) // 2
    if k_grid and k_grid[-1] > n_dyads:
        raise ValueError(f"k={k_grid[-1]} exceeds the {n_dyads} candidate dyads")
    split_rng = make_rng(np.random.SeedSequence([cfg.split_seed, 1]))
    degraded = degrade_edges(full, remove_frac, split_rng)
    feats = _features_for(bundle, cfg)
    if cfg.val_frac > 0:
        adj, vsplit = make_vgae_split(degraded, 0.0, cfg.val_frac, split_rng, seed=cfg.split_seed)
        monitor = lambda p: _link_metrics(p, adj, feats, vsplit, "val", cfg)[0]  # noqa: E731
    else:
        adj, monitor = degraded, None
    trainer = Trainer(adj, feats, cfg)
    trainer.fit(monitor)
    probs = reconstruct_scores(trainer.params, adj, feats, cfg.model_config(), cfg.symmetrize_scores)
    iu, ju = np.triu_indices(n, k=1)
    order = rank_by_score(probs[iu, ju])
    relevance = full.entries[iu[order], ju[order]] == PRESENT
    precisions = precision_at_k(relevance, k_grid) if k_grid else np.zeros(0)
    report = _base_report(cfg, trainer)
    report["remove_frac"] = remove_frac
    report["edges"] = int(relevance.sum())
    report["density_baseline"] = float(relevance.sum()) / n_dyads
    for k, p in zip(k_grid, precisions):
        report[f"precision_at_{k}"] = float(p)
    # retrieval of edges the model never saw: rank only dyads not present in its input
    hidden = adj.entries[iu[order], ju[order]] != PRESENT
    hidden_rel = relevance[hidden]
    n_hidden = int(hidden_rel.sum())
    report["hidden_edges"] = n_hidden
    if n_hidden:
        report["hidden_precision"] = float(precision_at_k(hidden_rel, n_hidden))
        report["hidden_baseline"] = n_hidden / len(hidden_rel)
    curve = list(zip(k_grid, (float(p) for p in precisions)))
    return report, trainer.params, curve


def aggregate(reports):
    """Mean and population std of every numeric metric across repeated runs."""
    if len(reports) == 1:
        return dict(reports[0])
    out = {"task": reports[0]["task"], "repeats": len(reports),
           "seeds": ",".join(str(r["seed"]) for r in reports)}
    for key in reports[0]:
        if key in ("task", "seed"):
            continue
        vals = [r.get(key) for r in reports]
        if all(isinstance(v, (int, float, np.floating, np.integer)) for v in vals):
            arr = np.asarray(vals, dtype=np.float64)
            out[f"{key}_mean"] = float(arr.mean())
            out[f"{key}_std"] = float(arr.std())
    return out
