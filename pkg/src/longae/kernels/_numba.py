"""numba-compiled kernels. Row loops fuse what numpy does in several passes."""
import math

import numpy as np
from numba import njit


@njit(cache=True, error_model="numpy")
def _mvn_forward(x, eps, out, inv_std):
    rows, cols = x.shape
    for i in range(rows):
        mean = 0.0
        for j in range(cols):
            mean += x[i, j]
        mean /= cols
        var = 0.0
        for j in range(cols):
            d = x[i, j] - mean
            var += d * d
        var /= cols
        s = 1.0 / math.sqrt(var + eps)
        inv_std[i] = s
        for j in range(cols):
            out[i, j] = (x[i, j] - mean) * s


def mvn_forward(x, eps):
    out = np.empty_like(x)
    inv_std = np.empty(x.shape[0], dtype=x.dtype)
    _mvn_forward(np.ascontiguousarray(x), eps, out, inv_std)
    return out, inv_std


@njit(cache=True, error_model="numpy")
def _mvn_backward(dy, y, inv_std, out):
    rows, cols = dy.shape
    for i in range(rows):
        a = 0.0
        b = 0.0
        for j in range(cols):
            a += dy[i, j]
            b += dy[i, j] * y[i, j]
        a /= cols
        b /= cols
        s = inv_std[i]
        for j in range(cols):
            out[i, j] = (dy[i, j] - a - y[i, j] * b) * s


def mvn_backward(dy, y, inv_std):
    out = np.empty_like(dy)
    _mvn_backward(np.ascontiguousarray(dy), np.ascontiguousarray(y), inv_std, out)
    return out


@njit(cache=True, error_model="numpy")
def _softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True, error_model="numpy")
def _masked_bce_rows(targets, logits, mask, zeta, clamp, losses, grad):
    rows, cols = logits.shape
    for i in range(rows):
        msum = 0.0
        acc = 0.0
        for j in range(cols):
            msum += mask[i, j]
        for j in range(cols):
            mk = mask[i, j]
            if mk == 0.0:
                grad[i, j] = 0.0
                continue
            t = targets[i, j]
            l = logits[i, j]
            sp_neg = _softplus(-l)
            sp_pos = _softplus(l)
            sig = 1.0 / (1.0 + math.exp(-l))
            g = 0.0
            # written so a NaN logit falls through to the NaN-producing branch
            if sp_neg >= clamp:
                sp_neg = clamp
            else:
                g += zeta * t * (sig - 1.0)
            if sp_pos >= clamp:
                sp_pos = clamp
            else:
                g += (1.0 - t) * sig
            acc += mk * (zeta * t * sp_neg + (1.0 - t) * sp_pos)
            grad[i, j] = mk * g / msum
        losses[i] = acc / msum


def masked_bce_rows(targets, logits, mask, zeta, clamp):
    losses = np.empty(logits.shape[0], dtype=logits.dtype)
    grad = np.empty_like(logits)
    _masked_bce_rows(
        np.ascontiguousarray(targets, dtype=logits.dtype),
        np.ascontiguousarray(logits),
        np.ascontiguousarray(mask, dtype=logits.dtype),
        float(zeta), float(clamp), losses, grad,
    )
    return losses, grad


@njit(cache=True, error_model="numpy")
def _adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    step = lr / bc1
    for k in range(param.size):
        g = grad[k]
        mk = beta1 * m[k] + (1.0 - beta1) * g
        vk = beta2 * v[k] + (1.0 - beta2) * (g * g)
        m[k] = mk
        v[k] = vk
        param[k] -= step * mk / (math.sqrt(vk / bc2) + eps)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    # reshape(-1) on C-contiguous arrays returns views, so updates land in place
    _adam_update(param.reshape(-1), np.ascontiguousarray(grad).reshape(-1),
                 m.reshape(-1), v.reshape(-1), lr, beta1, beta2, eps, bc1, bc2)
