"""Dense numeric building blocks: products, activations, MVN, dropout, init.

All functions accept a single vector or a batch of row vectors (2-D array,
one example per row). Randomness always comes from an explicit
``numpy.random.Generator``; ``make_rng`` builds one on the PCG64 bit
generator so that a seed pins the full draw sequence across platforms.
"""
import numpy as np

from . import kernels

MVN_EPS = 1e-8


def make_rng(seed):
    """PCG64-backed generator. Identical seeds give identical draw sequences."""
    return np.random.Generator(np.random.PCG64(seed))


def float_dtype(precision):
    if precision in (32, "32", "float32"):
        return np.float32
    if precision in (64, "64", "float64"):
        return np.float64
    raise ValueError(f"precision must be 32 or 64, got {precision!r}")


def matvec(M, v, transpose=False):
    """``M @ v`` or ``M.T @ v``.

    The transposed form multiplies a contiguous copy of ``M.T`` so both forms
    share one summation order and agree bit for bit.
    """
    M = np.asarray(M)
    v = np.asarray(v)
    need = M.shape[0] if transpose else M.shape[1]
    if M.ndim != 2 or v.ndim != 1 or v.shape[0] != need:
        op = "M.T @ v" if transpose else "M @ v"
        raise ValueError(f"dimension mismatch in {op}: M has shape {M.shape}, v has shape {v.shape}")
    return np.ascontiguousarray(M.T) @ v if transpose else M @ v


def relu(x, return_mask=False):
    x = np.asarray(x)
    mask = x > 0
    out = np.where(mask, x, 0).astype(x.dtype, copy=False)
    if return_mask:
        return out, mask
    return out


def sigmoid(x):
    x = np.asarray(x, dtype=np.result_type(x, np.float32))
    # exp(-|x|) never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype, copy=False)


def softmax(x):
    x = np.asarray(x)
    shifted = x - x.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def sigmoid_softmax(x, mode):
    if mode == "sigmoid":
        return sigmoid(x)
    if mode == "softmax":
        return softmax(x)
    raise ValueError(f"mode must be 'sigmoid' or 'softmax', got {mode!r}")


def mvn_normalize(x, epsilon=MVN_EPS, return_stats=False):
    """Per-example mean-variance normalization (population variance).

    Statistics come from each row alone, so train and inference behave the
    same. Returns ``(out, inv_std)`` when ``return_stats`` is set; the
    backward pass only needs the output and ``inv_std``.
    """
    x = np.asarray(x)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    out, inv_std = kernels.mvn_forward(rows, epsilon)
    if single:
        out = out[0]
    if return_stats:
        return out, inv_std
    return out


def mvn_backward(dy, y, inv_std):
    single = dy.ndim == 1
    if single:
        return kernels.mvn_backward(dy[None, :], y[None, :], np.atleast_1d(inv_std))[0]
    return kernels.mvn_backward(dy, y, inv_std)


def dropout(x, rate, rng=None, training=True):
    """Inverted dropout. Returns ``(out, scale_mask)``.

    ``scale_mask`` holds 0 or 1/(1-rate) per element and is ``None`` when the
    call is an identity (inference or rate 0).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(x)
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = rng.random(x.shape) >= rate
    scale = (keep / (1.0 - rate)).astype(x.dtype)
    return x * scale, scale


def xavier_init(rows, cols, rng, dtype=np.float32):
    """Glorot-uniform matrix on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))]."""
    if rows < 1 or cols < 1:
        raise ValueError(f"xavier_init needs positive dims, got ({rows}, {cols})")
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(dtype)
