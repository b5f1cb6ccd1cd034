"""Adam updates and validation-driven early stopping."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads):
    """One bias-corrected Adam update, in place on ``params``. No weight decay."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    grad_tensors = grads.tensors()
    for name, p in params.tensors().items():
        g = grad_tensors.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        if not p.flags.c_contiguous:
            raise ValueError(f"parameter {name} must be C-contiguous for in-place updates")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        kernels.adam_update(p, g.astype(p.dtype, copy=False), state.m[name], state.v[name],
                            state.lr, state.beta1, state.beta2, state.eps, bc1, bc2)
    return params


class EarlyStopping:
    """Stop once the monitored metric fails to strictly improve ``patience + 1`` times in a row.

    The best parameters are snapshotted on every improvement and written
    back into the live arrays on stop (or via ``restore``).
    """

    def __init__(self, patience=5):
        self.patience = patience
        self.best_metric = -np.inf
        self.best_epoch = -1
        self.epochs_since_best = 0
        self.snapshot = None
        self._epoch = 0

    def check(self, metric, params):
        self._epoch += 1
        if not np.isfinite(metric):
            raise ValueError(f"monitored metric must be finite, got {metric}")
        if metric > self.best_metric:
            self.best_metric = float(metric)
            self.best_epoch = self._epoch
            self.epochs_since_best = 0
            self.snapshot = params.copy()
            return "continue"
        self.epochs_since_best += 1
        if self.epochs_since_best > self.patience:
            self.restore(params)
            return "stop"
        return "continue"

    def restore(self, params):
        if self.snapshot is None:
            return params
        snap = self.snapshot.tensors()
        for name, t in params.tensors().items():
            np.copyto(t, snap[name])
        return params
