"""Loss functions with exact gradients.

All HC-family losses operate on a :class:`LabeledFeatures` batch and sum over
the distinct classes present in it.  Modality tags are ``1`` (visible) and
``2`` (infrared).
"""

from dataclasses import dataclass, field

import numpy as np

from hcreid.linalg import softmax

VISIBLE, INFRARED = 1, 2
METRICS = ("sqeuclidean", "cosine")
CONSTRAINTS = ("weak", "strong")


class MissingModalityError(ValueError):
    """A class lacks samples of one modality, so its center is undefined."""


@dataclass(frozen=True)
class LabeledFeatures:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    modalities: np.ndarray  # (n,) values in {1, 2}

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats[:, None]
        labels = np.asarray(self.labels)
        mods = np.asarray(self.modalities)
        if not (len(feats) == len(labels) == len(mods)):
            raise ValueError("features, labels and modalities must have equal length")
        if not np.all(np.isin(mods, (VISIBLE, INFRARED))):
            raise ValueError("modality tags must be 1 or 2")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "modalities", mods)

    def classes(self):
        return np.unique(self.labels)

    def with_features(self, features):
        return LabeledFeatures(features, self.labels, self.modalities)


@dataclass(frozen=True)
class HcConfig:
    metric: str = "sqeuclidean"
    margin_alpha: float = 0.0
    constraint: str = "weak"
    lam: float = 0.5

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}, got {self.constraint!r}")
        if self.margin_alpha < 0:
            raise ValueError("margin_alpha must be non-negative")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class CenterLossState:
    """Per-class centers for the center-loss comparison.

    ``center_lr_alpha`` is the center update rate, unrelated to the HC margin.
    """

    centers: dict = field(default_factory=dict)
    center_lr_alpha: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.center_lr_alpha <= 1.0:
            raise ValueError("center_lr_alpha must lie in [0, 1]")
        self.centers = {k: np.asarray(v, dtype=np.float64).copy() for k, v in self.centers.items()}

    @classmethod
    def zeros(cls, classes, dim, center_lr_alpha=0.3):
        return cls({c: np.zeros(dim) for c in classes}, center_lr_alpha)


def cross_entropy(logits, labels):
    """Summed softmax cross-entropy over the batch.

    Returns ``(loss, grad)`` where ``grad[i] = softmax(logits[i]) - onehot(labels[i])``.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    n_classes = z.shape[1]
    if len(y) != len(z):
        raise ValueError("one label per logit vector required")
    if np.any((y < 0) | (y >= n_classes)):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(y))
    loss = float(np.sum(log_norm - shifted[rows, y]))
    grad = softmax(z)
    grad[rows, y] -= 1.0
    return loss, grad


def modality_centers(batch, cls):
    """Mean features of each modality for one class: ``(c1, c2, m, n)``."""
    in_class = batch.labels == cls
    x1 = batch.features[in_class & (batch.modalities == VISIBLE)]
    x2 = batch.features[in_class & (batch.modalities == INFRARED)]
    if len(x1) == 0 or len(x2) == 0:
        raise MissingModalityError(f"class {cls!r} needs samples of both modalities")
    return x1.mean(axis=0), x2.mean(axis=0), len(x1), len(x2)


def _distance(c1, c2, metric):
    if metric == "sqeuclidean":
        diff = c1 - c2
        return float(diff @ diff)
    n1, n2 = np.linalg.norm(c1), np.linalg.norm(c2)
    if n1 == 0 or n2 == 0:
        raise ValueError("cosine distance undefined for a zero center")
    return 1.0 - float(c1 @ c2) / (n1 * n2)


def _distance_grads(c1, c2, metric):
    """Partial derivatives of the center distance w.r.t. ``c1`` and ``c2``."""
    if metric == "sqeuclidean":
        return 2.0 * (c1 - c2), 2.0 * (c2 - c1)
    n1, n2 = np.linalg.norm(c1), np.linalg.norm(c2)
    u1, u2 = c1 / n1, c2 / n2
    cos = float(u1 @ u2)
    return -(u2 - cos * u1) / n1, -(u1 - cos * u2) / n2


def center_distances(batch, metric="sqeuclidean"):
    """``{class: D(c1, c2)}`` for every class in the batch."""
    out = {}
    for cls in batch.classes():
        c1, c2, _, _ = modality_centers(batch, cls)
        out[cls] = _distance(c1, c2, metric)
    return out


def hc_loss(batch, cfg=HcConfig()):
    """Hetero-Center loss: sum over classes of ``max(D(c1, c2) - alpha, 0)``.

    ``cfg.constraint == "strong"`` dispatches to :func:`strong_constraint_loss`
    (squared-Euclidean only).
    """
    if cfg.constraint == "strong":
        return strong_constraint_loss(batch, cfg.margin_alpha)
    dists = center_distances(batch, cfg.metric)
    return float(sum(max(d - cfg.margin_alpha, 0.0) for d in dists.values()))


def hc_loss_gradient(batch, cfg=HcConfig()):
    """Per-sample gradient of :func:`hc_loss`, shape ``(n, d)``.

    Each modality uses its own sample count, so a visible sample of class i
    receives ``(2/m)(c1 - c2)`` and an infrared one ``(2/n)(c2 - c1)`` under the
    squared-Euclidean metric.  Inactive hinges (``D <= alpha``) contribute zero.
    """
    if cfg.constraint == "strong":
        return strong_constraint_gradient(batch, cfg.margin_alpha)
    grad = np.zeros_like(batch.features)
    for cls in batch.classes():
        c1, c2, m, n = modality_centers(batch, cls)
        if _distance(c1, c2, cfg.metric) <= cfg.margin_alpha:
            continue
        g1, g2 = _distance_grads(c1, c2, cfg.metric)
        in_class = batch.labels == cls
        grad[in_class & (batch.modalities == VISIBLE)] = g1 / m
        grad[in_class & (batch.modalities == INFRARED)] = g2 / n
    return grad


def _class_moments(batch, cls):
    in_class = batch.labels == cls
    sel1 = in_class & (batch.modalities == VISIBLE)
    sel2 = in_class & (batch.modalities == INFRARED)
    x1, x2 = batch.features[sel1], batch.features[sel2]
    if len(x1) == 0 or len(x2) == 0:
        raise MissingModalityError(f"class {cls!r} needs samples of both modalities")
    c1, c2 = x1.mean(axis=0), x2.mean(axis=0)
    # population variance per dimension
    v1, v2 = ((x1 - c1) ** 2).mean(axis=0), ((x2 - c2) ** 2).mean(axis=0)
    return sel1, sel2, x1, x2, c1, c2, v1, v2


def strong_constraint_loss(batch, margin_alpha=0.0):
    """Sum over classes of ``max(|c1 - c2|^2 + |v1 - v2|^2 - alpha, 0)``."""
    total = 0.0
    for cls in batch.classes():
        *_, c1, c2, v1, v2 = _class_moments(batch, cls)
        value = float((c1 - c2) @ (c1 - c2) + (v1 - v2) @ (v1 - v2))
        total += max(value - margin_alpha, 0.0)
    return total


def strong_constraint_gradient(batch, margin_alpha=0.0):
    grad = np.zeros_like(batch.features)
    for cls in batch.classes():
        sel1, sel2, x1, x2, c1, c2, v1, v2 = _class_moments(batch, cls)
        value = float((c1 - c2) @ (c1 - c2) + (v1 - v2) @ (v1 - v2))
        if value <= margin_alpha:
            continue
        m, n = len(x1), len(x2)
        # d v / d x_j = 2 (x_j - c) / count; the path through c vanishes
        grad[sel1] = 2.0 * (c1 - c2) / m + 4.0 * (v1 - v2) * (x1 - c1) / m
        grad[sel2] = 2.0 * (c2 - c1) / n + 4.0 * (v2 - v1) * (x2 - c2) / n
    return grad


def center_loss(batch, state):
    """Center loss ``1/2 sum_i |x_i - c_{y_i}|^2``.

    Returns ``(loss, grad, centers)``.  ``state.centers`` is updated in place
    using the counts-smoothed rule ``c -= alpha * sum(c - x_i) / (1 + count)``;
    the loss and gradient use the centers from before the update.
    """
    x = batch.features
    missing = [c for c in np.unique(batch.labels) if c not in state.centers]
    if missing:
        raise KeyError(f"no center for classes {missing}")
    centers = np.stack([state.centers[c] for c in batch.labels]) if len(x) else np.zeros_like(x)
    if centers.shape != x.shape:
        raise ValueError("center and feature dimensions differ")
    diff = x - centers
    loss = 0.5 * float(np.sum(diff * diff))
    for cls in np.unique(batch.labels):
        sel = batch.labels == cls
        c = state.centers[cls]
        delta = np.sum(c - x[sel], axis=0) / (1.0 + sel.sum())
        state.centers[cls] = c - state.center_lr_alpha * delta
    return loss, diff, state.centers


def total_loss(ce, hc, lam):
    """Joint objective ``ce + lam * hc``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return ce + lam * hc
