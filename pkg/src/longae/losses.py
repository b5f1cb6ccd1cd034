"""Masked balanced cross-entropy and the objectives built on it.

Every loss returns ``(loss, grads)`` where ``grads`` are gradients of the
returned scalar with respect to the raw logits. Inputs may be one row
(1-D) or a batch (2-D); a batch loss is the mean of per-row losses.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import ABSENT, PRESENT


@dataclass
class LossConfig:
    zeta: float = 1.0
    zeta_mode: str = "global"   # or "per_row"
    epsilon: float = 1e-7       # probability clamp inside log terms
    feature_reduction: str = "mean"  # or "sum"

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        if self.zeta_mode not in ("global", "per_row"):
            raise ValueError(f"unknown zeta_mode {self.zeta_mode!r}")
        if self.feature_reduction not in ("mean", "sum"):
            raise ValueError(f"unknown feature_reduction {self.feature_reduction!r}")

    @property
    def log_clamp(self):
        return -np.log(self.epsilon)


def compute_zeta(adj, scope="global"):
    """``1 - present/absent`` over the observed entries of the scope, clamped to [0, 1].

    ``scope`` is ``"global"`` or a row index. Every observed entry counts,
    including the diagonal self-loop.
    """
    if scope == "global":
        entries = adj.entries
    else:
        entries = adj.entries[int(scope)]
    present = np.count_nonzero(entries == PRESENT)
    absent = np.count_nonzero(entries == ABSENT)
    if absent == 0:
        raise ValueError("zeta undefined: scope has no observed absent entries")
    return float(np.clip(1.0 - present / absent, 0.0, 1.0))


def row_zetas(entries):
    """Per-row zeta for a (B, N) block of adjacency entries."""
    present = (entries == PRESENT).sum(axis=1)
    absent = (entries == ABSENT).sum(axis=1)
    if np.any(absent == 0):
        raise ValueError("zeta undefined: a row has no observed absent entries")
    return np.clip(1.0 - present / absent, 0.0, 1.0)


def _as_batch(*arrays):
    single = np.ndim(arrays[0]) == 1
    if single:
        return True, [np.asarray(a)[None, :] for a in arrays]
    return False, [np.asarray(a) for a in arrays]


def _zeta_for(cfg, zeta, n_rows):
    z = cfg.zeta if zeta is None else zeta
    return np.broadcast_to(np.asarray(z, dtype=np.float64), (n_rows,))


def mbce(targets, logits, mask, cfg=None, zeta=None):
    """Masked balanced BCE. ``zeta`` overrides ``cfg.zeta`` (scalar or per-row array)."""
    cfg = cfg or LossConfig()
    single, (t, l, m) = _as_batch(targets, logits, mask)
    if t.shape != l.shape or m.shape != l.shape:
        raise ValueError(f"shape mismatch: targets {t.shape}, logits {l.shape}, mask {m.shape}")
    if np.any(m.sum(axis=1) == 0):
        raise ValueError("mbce undefined for a row with every entry masked")
    zetas = _zeta_for(cfg, zeta, l.shape[0])
    if np.all(zetas == zetas[0]):
        losses, grad = kernels.masked_bce_rows(t, l, m, float(zetas[0]), cfg.log_clamp)
    else:
        parts = [kernels.masked_bce_rows(t[i:i + 1], l[i:i + 1], m[i:i + 1], float(zetas[i]), cfg.log_clamp)
                 for i in range(l.shape[0])]
        losses = np.concatenate([p[0] for p in parts])
        grad = np.concatenate([p[1] for p in parts])
    if single:
        return float(losses[0]), grad[0]
    b = l.shape[0]
    return float(losses.mean()), grad / b


def feature_ce(targets, logits, cfg=None):
    """Sigmoid cross-entropy with soft targets in [0, 1], unmasked."""
    cfg = cfg or LossConfig()
    single, (t, l) = _as_batch(targets, logits)
    b, f = l.shape
    if f == 0:
        loss, grad = 0.0, np.zeros_like(l)
    else:
        ones = np.ones_like(l)
        rows, grad = kernels.masked_bce_rows(t, l, ones, 1.0, cfg.log_clamp)
        # kernel divides each row by F; "sum" undoes that
        if cfg.feature_reduction == "sum":
            rows, grad = rows * f, grad * f
        loss = float(rows.mean()) if not single else float(rows[0])
        if not single:
            grad = grad / b
    return loss, (grad[0] if single else grad)


def alpha_mbce(row, a_hat_logits, x_hat_logits, cfg=None, zeta=None):
    """MBCE on the adjacency slice plus feature CE on the feature slice.

    ``row`` is an ``AugmentedRow`` (1-D parts, or 2-D for a batch).
    Returns ``(loss, (grad_a_hat, grad_x_hat))``.
    """
    la, ga = mbce(row.a_part, a_hat_logits, row.mask, cfg, zeta)
    lx, gx = feature_ce(row.x_part, x_hat_logits, cfg)
    return la + lx, (ga, gx)


def class_ce(logits, labels):
    """Softmax cross-entropy per row; rows with label -1 contribute 0."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    c = logits.shape[1]
    if np.any(labels >= c):
        raise ValueError(f"label index {labels.max()} out of range for {c} classes")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    has = labels >= 0
    rows = np.zeros(logits.shape[0], dtype=np.float64)
    rows[has] = -log_p[has, labels[has]]
    grad = np.exp(log_p)
    grad[has, labels[has]] -= 1.0
    grad[~has] = 0.0
    return rows, grad.astype(logits.dtype, copy=False)


def multitask_loss(row, trace, labels, cfg=None, zeta=None):
    """MBCE on the adjacency slice plus masked softmax CE on node labels.

    ``labels`` holds a class index per row, or -1 where the node has no
    training label. Returns ``(loss, {"a_hat": ..., "class_logits": ...})``.
    """
    la, ga = mbce(np.atleast_2d(row.a_part), np.atleast_2d(trace.a_hat), np.atleast_2d(row.mask), cfg, zeta)
    grads = {"a_hat": ga}
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if trace.class_logits is None:
        if np.any(labels >= 0):
            raise ValueError("labelled rows need a classifier head")
        return la, grads
    ce_rows, gc = class_ce(trace.class_logits, labels)
    b = gc.shape[0]
    loss = la + float(ce_rows.mean())
    grads["class_logits"] = gc / b
    return loss, grads


__all__ = ["LossConfig", "compute_zeta", "row_zetas", "mbce", "feature_ce", "alpha_mbce",
           "class_ce", "multitask_loss"]
