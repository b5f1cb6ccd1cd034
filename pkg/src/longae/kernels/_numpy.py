"""Pure-numpy reference kernels.

Every function here has a twin in ``_numba`` with the same signature and
semantics. These are used when numba is unavailable or disabled through
``LONGAE_BACKEND=numpy``.
"""
import numpy as np


def mvn_forward(x, eps):
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return (centered * inv_std).astype(x.dtype, copy=False), inv_std[:, 0].astype(x.dtype, copy=False)


def mvn_backward(dy, y, inv_std):
    # exact Jacobian of (x - mean) / sqrt(var + eps) with population variance
    mean_dy = dy.mean(axis=1, keepdims=True)
    mean_dy_y = (dy * y).mean(axis=1, keepdims=True)
    return ((dy - mean_dy - y * mean_dy_y) * inv_std[:, None]).astype(dy.dtype, copy=False)


def _softplus(x):
    return np.logaddexp(0.0, x)


def masked_bce_rows(targets, logits, mask, zeta, clamp):
    """Per-row masked balanced BCE and its gradient w.r.t. the logits.

    ``clamp`` caps each log term at -log(eps); the gradient is zero where
    the cap is active.
    """
    sp_neg = _softplus(-logits)  # -log sigmoid(l)
    sp_pos = _softplus(logits)   # -log(1 - sigmoid(l))
    pos_active = sp_neg < clamp
    neg_active = sp_pos < clamp
    sp_neg = np.minimum(sp_neg, clamp)
    sp_pos = np.minimum(sp_pos, clamp)
    elem = zeta * targets * sp_neg + (1.0 - targets) * sp_pos
    observed = mask != 0
    msum = mask.sum(axis=1)
    # where() rather than a product so non-finite values at masked entries vanish
    losses = np.where(observed, mask * elem, 0.0).sum(axis=1) / msum
    e = np.exp(-np.abs(logits))
    sig = np.where(logits >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    g = zeta * targets * (sig - 1.0) * pos_active + (1.0 - targets) * sig * neg_active
    grad = np.where(observed, mask * g, 0.0) / msum[:, None]
    return losses.astype(logits.dtype, copy=False), grad.astype(logits.dtype, copy=False)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    param -= (lr / bc1) * m / (np.sqrt(v / bc2) + eps)
