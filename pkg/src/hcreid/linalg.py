"""Dense float64 primitives shared by the loss and network code.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64
(row-major).  Functions that act on vectors also accept stacked inputs and
operate along the last axis.
"""

import numpy as np


class DegenerateVectorError(ValueError):
    """Raised when a zero vector is normalized."""


def as_vec(v):
    a = np.asarray(v, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1)
    return a


def _norms(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise DegenerateVectorError("cannot normalize a zero vector")
    return n


def l2_normalize(v):
    """Scale ``v`` (or each row of a stack) to unit Euclidean norm."""
    v = as_vec(v)
    return v / _norms(v)


def l2_normalize_backward(v, upstream_grad):
    """Vector-Jacobian product of :func:`l2_normalize` at ``v``.

    With ``u = v / |v|`` the Jacobian is ``(I - u u^T) / |v|``, which is
    symmetric, so the result is ``(g - u (u . g)) / |v|``.
    """
    v = as_vec(v)
    g = as_vec(upstream_grad)
    if g.shape != v.shape:
        raise ValueError(f"gradient shape {g.shape} does not match input {v.shape}")
    n = _norms(v)
    u = v / n
    return (g - u * np.sum(u * g, axis=-1, keepdims=True)) / n


def softmax(logits):
    """Numerically stable softmax along the last axis."""
    z = as_vec(logits)
    if z.shape[-1] == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def leaky_relu(x, slope=0.01):
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x, upstream_grad, slope=0.01):
    # subgradient at exactly 0 taken from the negative side
    return np.where(x > 0, upstream_grad, slope * upstream_grad)


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in, fan_out) if shape is None else shape
    return rng.uniform(-limit, limit, size=shape)
