"""Tied-weight local-neighborhood graph autoencoder.

Row-vector convention: a batch ``x`` has shape (B, N+F). The encoder is

    h1 = drop(mvn(relu(x @ V.T + b1)))
    z  = mvn(relu(h1 @ W.T + b2))

and the decoder reuses the same matrices transposed:

    h3 = mvn(relu(z @ W + b3))
    out = drop(h3) @ V + b4          (linear; sliced into a_hat | x_hat)

The optional classifier reads the undropped ``h3``:
``class_logits = h3 @ U.T + b5``. ``V`` is (H1, N+F), ``W`` is (D, H1),
``U`` is (C, H1).
"""
from dataclasses import dataclass, field, fields

import numpy as np

from .graph import augmented_batch
from .numeric import dropout, mvn_backward, mvn_normalize, relu, sigmoid, softmax, xavier_init

HIDDEN = 256
LATENT = 128

_TENSOR_ORDER = ("V", "W", "b1", "b2", "b3", "b4", "U", "b5", "V_dec", "W_dec")


@dataclass
class ModelConfig:
    input_dropout: float = 0.0
    hidden_dropout: float = 0.0
    mvn: bool = True
    mvn_eps: float = 1e-8


@dataclass
class ModelParams:
    """Trainable tensors. ``V_dec``/``W_dec`` are only set for untied models."""
    V: np.ndarray
    W: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    U: np.ndarray = None
    b5: np.ndarray = None
    V_dec: np.ndarray = None
    W_dec: np.ndarray = None
    n_nodes: int = field(default=0)
    n_features: int = field(default=0)

    @property
    def tied(self):
        return self.V_dec is None

    @property
    def has_classifier(self):
        return self.U is not None

    @property
    def in_dim(self):
        return self.V.shape[1]

    @property
    def hidden(self):
        return self.V.shape[0]

    @property
    def latent(self):
        return self.W.shape[0]

    @property
    def n_classes(self):
        return 0 if self.U is None else self.U.shape[0]

    @property
    def dtype(self):
        return self.V.dtype

    def decoder_matrices(self):
        """Matrices applied by the decoder, in column-vector form (W^T, V^T).

        For tied models these are transposed views sharing memory with W and V.
        """
        W = self.W if self.W_dec is None else self.W_dec
        V = self.V if self.V_dec is None else self.V_dec
        return W.T, V.T

    def tensors(self):
        """Present tensors in checkpoint order."""
        out = {}
        for name in _TENSOR_ORDER:
            t = getattr(self, name)
            if t is not None:
                out[name] = t
        return out

    def num_params(self):
        return sum(t.size for t in self.tensors().values())

    def copy(self):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        for name, t in self.tensors().items():
            kw[name] = t.copy()
        return ModelParams(**kw)

    def zeros_like(self):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        for name, t in self.tensors().items():
            kw[name] = np.zeros_like(t)
        return ModelParams(**kw)

    def astype(self, dtype):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        for name, t in self.tensors().items():
            kw[name] = np.ascontiguousarray(t, dtype=dtype)
        return ModelParams(**kw)

    def untied_clone(self):
        """Copy whose decoder owns independent copies of V and W."""
        p = self.copy()
        p.V_dec = self.V.copy()
        p.W_dec = self.W.copy()
        return p


Gradients = ModelParams


def init_params(n_nodes, n_features, rng, n_classes=0, hidden=HIDDEN, latent=LATENT,
                dtype=np.float32, tied=True):
    """Xavier-uniform weights, zero biases."""
    in_dim = n_nodes + n_features
    V = xavier_init(hidden, in_dim, rng, dtype)
    W = xavier_init(latent, hidden, rng, dtype)
    p = ModelParams(
        V=V, W=W,
        b1=np.zeros(hidden, dtype), b2=np.zeros(latent, dtype),
        b3=np.zeros(hidden, dtype), b4=np.zeros(in_dim, dtype),
        n_nodes=n_nodes, n_features=n_features,
    )
    if n_classes:
        p.U = xavier_init(n_classes, hidden, rng, dtype)
        p.b5 = np.zeros(n_classes, dtype)
    if not tied:
        p.V_dec = xavier_init(hidden, in_dim, rng, dtype)
        p.W_dec = xavier_init(latent, hidden, rng, dtype)
    return p


@dataclass
class ForwardTrace:
    x: np.ndarray
    h1_pre: np.ndarray = None
    h1_act: np.ndarray = None
    h1_inv: np.ndarray = None
    h1_drop: np.ndarray = None
    h1: np.ndarray = None
    z_pre: np.ndarray = None
    z: np.ndarray = None
    z_inv: np.ndarray = None
    h3_pre: np.ndarray = None
    h3_act: np.ndarray = None
    h3_inv: np.ndarray = None
    h3_drop: np.ndarray = None
    h3: np.ndarray = None
    out: np.ndarray = None
    a_hat: np.ndarray = None
    x_hat: np.ndarray = None
    class_logits: np.ndarray = None
    y_hat: np.ndarray = None


def _activate(pre, cfg):
    """relu then optional MVN; returns (activation, inv_std or None)."""
    act = relu(pre)
    if not cfg.mvn:
        return act, None
    return mvn_normalize(act, cfg.mvn_eps, return_stats=True)


def _activate_back(d_act, pre, act, inv, cfg):
    d = mvn_backward(d_act, act, inv) if cfg.mvn else d_act
    return d * (pre > 0)


def _check_input(params, x):
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(f"input rows of shape {x.shape} do not match V with {params.in_dim} columns")


def encode(params, x, rng=None, training=False, cfg=None):
    """Encoder half of the forward pass; returns a trace holding ``z``."""
    cfg = cfg or ModelConfig()
    x = np.atleast_2d(np.asarray(x, dtype=params.dtype))
    _check_input(params, x)
    tr = ForwardTrace(x=x)
    x_in, tr_mask = dropout(x, cfg.input_dropout, rng, training)
    tr.x = x_in
    tr.h1_pre = x_in @ params.V.T + params.b1
    tr.h1_act, tr.h1_inv = _activate(tr.h1_pre, cfg)
    tr.h1, tr.h1_drop = dropout(tr.h1_act, cfg.hidden_dropout, rng, training)
    tr.z_pre = tr.h1 @ params.W.T + params.b2
    tr.z, tr.z_inv = _activate(tr.z_pre, cfg)
    return tr


def forward_autoencoder(params, x, rng=None, training=False, cfg=None):
    cfg = cfg or ModelConfig()
    tr = encode(params, x, rng, training, cfg)
    Wt, Vt = params.decoder_matrices()
    tr.h3_pre = tr.z @ Wt.T + params.b3
    tr.h3_act, tr.h3_inv = _activate(tr.h3_pre, cfg)
    tr.h3, tr.h3_drop = dropout(tr.h3_act, cfg.hidden_dropout, rng, training)
    tr.out = tr.h3 @ Vt.T + params.b4
    n = params.n_nodes
    tr.a_hat = tr.out[:, :n]
    tr.x_hat = tr.out[:, n:] if params.n_features else None
    return tr


def forward_classifier(params, trace):
    """Softmax label distribution from the decoder's first hidden activation."""
    if not params.has_classifier:
        raise ValueError("model has no classifier head")
    trace.class_logits = trace.h3_act @ params.U.T + params.b5
    trace.y_hat = softmax(trace.class_logits)
    return trace.y_hat


def forward(params, x, rng=None, training=False, cfg=None):
    tr = forward_autoencoder(params, x, rng, training, cfg)
    if params.has_classifier:
        forward_classifier(params, tr)
    return tr


def backward(params, trace, loss_grads, cfg=None):
    """Gradients of the loss w.r.t. every parameter.

    ``loss_grads`` maps ``"a_hat"`` (and optionally ``"x_hat"``,
    ``"class_logits"``) to gradients of the loss w.r.t. those outputs. For
    tied models the encoder- and decoder-side contributions to V and W are
    summed into one tensor each.
    """
    cfg = cfg or ModelConfig()
    g = ModelParams(V=None, W=None, b1=None, b2=None, b3=None, b4=None,
                    n_nodes=params.n_nodes, n_features=params.n_features)
    b = trace.out.shape[0]
    d_out = np.zeros_like(trace.out)
    n = params.n_nodes
    ga = loss_grads.get("a_hat")
    if ga is not None:
        ga = np.atleast_2d(ga)
        if ga.shape != (b, n):
            raise ValueError(f"a_hat gradient shape {ga.shape} does not match ({b}, {n})")
        d_out[:, :n] = ga
    gx = loss_grads.get("x_hat")
    if gx is not None and params.n_features:
        d_out[:, n:] = np.atleast_2d(gx)

    Wt, Vt = params.decoder_matrices()
    g_Vdec = trace.h3.T @ d_out
    g.b4 = d_out.sum(axis=0)
    d_h3 = d_out @ Vt
    d_h3act = d_h3 if trace.h3_drop is None else d_h3 * trace.h3_drop

    gc = loss_grads.get("class_logits")
    if gc is not None:
        if not params.has_classifier:
            raise ValueError("class_logits gradient given but model has no classifier head")
        gc = np.atleast_2d(gc).astype(params.dtype, copy=False)
        g.U = gc.T @ trace.h3_act
        g.b5 = gc.sum(axis=0)
        d_h3act = d_h3act + gc @ params.U

    d_h3pre = _activate_back(d_h3act, trace.h3_pre, trace.h3_act, trace.h3_inv, cfg)
    g.b3 = d_h3pre.sum(axis=0)
    g_Wdec = trace.z.T @ d_h3pre
    d_z = d_h3pre @ Wt

    d_zpre = _activate_back(d_z, trace.z_pre, trace.z, trace.z_inv, cfg)
    g.b2 = d_zpre.sum(axis=0)
    g_Wenc = d_zpre.T @ trace.h1
    d_h1 = d_zpre @ params.W
    d_h1act = d_h1 if trace.h1_drop is None else d_h1 * trace.h1_drop
    d_h1pre = _activate_back(d_h1act, trace.h1_pre, trace.h1_act, trace.h1_inv, cfg)
    g.b1 = d_h1pre.sum(axis=0)
    g_Venc = d_h1pre.T @ trace.x

    if params.tied:
        g.V = g_Venc + g_Vdec
        g.W = g_Wenc + g_Wdec
    else:
        g.V, g.V_dec = g_Venc, g_Vdec
        g.W, g.W_dec = g_Wenc, g_Wdec
    return g


def _row_chunks(rows, size):
    for start in range(0, len(rows), size):
        yield rows[start:start + size]


def predict_logits(params, adj, feats, rows, cfg=None, chunk=256):
    """Inference-mode ``a_hat`` logits for the given rows, shape (len(rows), N)."""
    rows = np.asarray(rows, dtype=np.int64)
    out = np.empty((len(rows), params.n_nodes), dtype=params.dtype)
    pos = 0
    for idx in _row_chunks(rows, chunk):
        x, _, _ = augmented_batch(adj, feats, idx, params.dtype)
        out[pos:pos + len(idx)] = forward_autoencoder(params, x, None, False, cfg).a_hat
        pos += len(idx)
    return out


def predict_proba_classes(params, adj, feats, rows, cfg=None, chunk=256):
    rows = np.asarray(rows, dtype=np.int64)
    parts = []
    for idx in _row_chunks(rows, chunk):
        x, _, _ = augmented_batch(adj, feats, idx, params.dtype)
        parts.append(forward(params, x, None, False, cfg).y_hat)
    if not parts:
        return np.zeros((0, params.n_classes), dtype=params.dtype)
    return np.concatenate(parts)


def score_pairs(params, adj, feats, pairs, symmetrize=True, cfg=None, chunk=256):
    """Link probabilities ``sigmoid(a_hat_i[j])`` for each pair, from inference passes.

    Each needed row is forwarded once. With ``symmetrize`` the score is the
    mean of the (i, j) and (j, i) readings.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n = params.n_nodes
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise IndexError(f"pair index outside [0, {n})")
    if symmetrize:
        src = np.concatenate([pairs[:, 0], pairs[:, 1]])
        dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    else:
        src, dst = pairs[:, 0], pairs[:, 1]
    rows, inv = np.unique(src, return_inverse=True)
    probs = np.empty(len(src), dtype=np.float64)
    for start in range(0, len(rows), chunk):
        idx = rows[start:start + chunk]
        logits = predict_logits(params, adj, feats, idx, cfg, chunk)
        sel = (inv >= start) & (inv < start + len(idx))
        probs[sel] = sigmoid(logits[inv[sel] - start, dst[sel]].astype(np.float64))
    if symmetrize:
        k = len(pairs)
        return 0.5 * (probs[:k] + probs[k:])
    return probs


def reconstruct_scores(params, adj, feats, cfg=None, symmetrize=True, chunk=256):
    """Dense (N, N) link probabilities for every pair."""
    n = params.n_nodes
    p = sigmoid(predict_logits(params, adj, feats, np.arange(n), cfg, chunk).astype(np.float64))
    if symmetrize:
        p = 0.5 * (p + p.T)
    return p
