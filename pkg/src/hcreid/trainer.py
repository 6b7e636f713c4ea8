"""SGD-with-momentum training under ``CE + lambda * HC``.

Every step draws a mini-batch, runs the network, sums cross-entropy over the
per-stripe classifiers and the chosen metric loss over the per-stripe unit
embeddings, backpropagates and updates all parameters.
"""

import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from hcreid import losses
from hcreid.losses import CenterLossState, HcConfig, LabeledFeatures
from hcreid.network import backward, extract_descriptor, forward, init_params
from hcreid.sampler import batches_per_epoch as _auto_batches
from hcreid.sampler import legacy_sample_batch, sample_batch

log = logging.getLogger(__name__)

LOSS_KINDS = ("hc", "center")
SAMPLERS = ("paired", "legacy")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    # desk schedule: one batch per epoch; 0 means ceil(train samples / K)
    batches_per_epoch: int = 1
    L: int = 4
    T: int = 8
    hc: HcConfig = HcConfig()
    loss: str = "hc"
    center_lr: float = 0.3
    sampler: str = "paired"
    # 1e-2 diverges with the batch-summed CE at K = 64
    lr_initial: float = 1e-3
    lr_after_decay: float = 1e-4
    decay_epoch: int = 30
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.lr_initial <= 0 or self.lr_after_decay <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0 <= self.decay_epoch <= self.epochs:
            raise ValueError("decay_epoch must lie in [0, epochs]")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.epochs < 1 or self.L < 1 or self.T < 1 or self.batches_per_epoch < 0:
            raise ValueError("epochs, L and T must be positive")

    @property
    def lam(self):
        return self.hc.lam

    @property
    def batch_size(self):
        return 2 * self.L * self.T

    def lr_at(self, epoch):
        return self.lr_initial if epoch < self.decay_epoch else self.lr_after_decay

    def with_lambda(self, lam):
        return replace(self, hc=replace(self.hc, lam=lam))


@dataclass
class TrainHistory:
    step: list = field(default_factory=list)
    epoch: list = field(default_factory=list)
    ce: list = field(default_factory=list)
    hc: list = field(default_factory=list)
    total: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    epoch_ce: list = field(default_factory=list)
    epoch_hc: list = field(default_factory=list)
    epoch_total: list = field(default_factory=list)
    epoch_center_distance: list = field(default_factory=list)

    def __len__(self):
        return len(self.step)

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write("step,epoch,ce,hc,total,lr\n")
        for row in zip(self.step, self.epoch, self.ce, self.hc, self.total, self.lr):
            s, e, *vals = row
            buf.write(f"{s},{e}," + ",".join(repr(float(v)) for v in vals) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text


def sgd_momentum_step(param, velocity, grad, lr, momentum=0.9):
    """``v' = momentum * v - lr * grad``; ``param' = param + v'``."""
    param, velocity, grad = (np.asarray(a, dtype=np.float64) for a in (param, velocity, grad))
    if not (param.shape == velocity.shape == grad.shape):
        raise ValueError("param, velocity and grad shapes must match")
    new_velocity = momentum * velocity - lr * grad
    return param + new_velocity, new_velocity


def center_distance_probe(params, cfg, heldout):
    """Mean over classes of the distance between modality centers of descriptors."""
    desc = extract_descriptor(params, cfg, heldout.features, heldout.modalities)
    batch = LabeledFeatures(desc, heldout.identities, heldout.modalities)
    dists = losses.center_distances(batch, "sqeuclidean")
    return float(np.mean(np.sqrt(list(dists.values()))))


def _complete_classes(labels, mods):
    keep = np.zeros(len(labels), dtype=bool)
    for cls in np.unique(labels):
        sel = labels == cls
        if {1, 2} <= set(mods[sel].tolist()):
            keep |= sel
    return keep


def _metric_loss(tcfg, normalized, labels, mods, center_states):
    """Metric-loss value and gradient w.r.t. the normalized stripe embeddings."""
    p = normalized.shape[1]
    value, grad = 0.0, np.zeros_like(normalized)
    if tcfg.loss == "center":
        for s in range(p):
            batch = LabeledFeatures(normalized[:, s], labels, mods)
            v, g, _ = losses.center_loss(batch, center_states[s])
            value += v
            grad[:, s] = g
        return value, grad
    keep = _complete_classes(labels, mods)
    if not keep.any():
        return 0.0, grad
    for s in range(p):
        batch = LabeledFeatures(normalized[keep, s], labels[keep], mods[keep])
        value += losses.hc_loss(batch, tcfg.hc)
        grad[keep, s] = losses.hc_loss_gradient(batch, tcfg.hc)
    return value, grad


def loss_and_grads(params, model_cfg, tcfg, x, labels, mods, center_states=None):
    """One evaluation of the joint objective; returns ``(ce, metric, total, grads)``."""
    emb, trace = forward(params, model_cfg, x, mods)
    ce, d_logits = 0.0, np.empty_like(emb.logits)
    for s in range(model_cfg.p):
        v, g = losses.cross_entropy(emb.logits[:, s], labels)
        ce += v
        d_logits[:, s] = g
    metric, d_norm = _metric_loss(tcfg, emb.normalized, labels, mods, center_states)
    total = losses.total_loss(ce, metric, tcfg.lam)
    grads = backward(params, model_cfg, trace, d_logits, tcfg.lam * d_norm)
    return ce, metric, total, grads


def train(model_cfg, tcfg, dataset, heldout=None, params=None):
    """Train on ``dataset``; returns ``(params, history)``.

    Identities of ``dataset`` are mapped to class indices in sorted order,
    and there must be exactly ``model_cfg.n_classes`` of them.  When
    ``heldout`` is given, :func:`center_distance_probe` is recorded after every
    epoch.
    """
    identities = dataset.identity_set()
    if len(identities) != model_cfg.n_classes:
        raise ValueError(f"dataset has {len(identities)} identities, model expects {model_cfg.n_classes}")
    class_of = {ident: k for k, ident in enumerate(identities)}
    init_seq, sample_seq = np.random.SeedSequence(tcfg.seed).spawn(2)
    if params is None:
        params = init_params(model_cfg, seed=init_seq)
    else:
        params = {k: v.copy() for k, v in params.items()}
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng(sample_seq)
    index = dataset.index()
    row_of = {int(sid): k for k, sid in enumerate(dataset.sample_ids)}
    center_states = None
    if tcfg.loss == "center":
        center_states = [
            CenterLossState.zeros(range(model_cfg.n_classes), model_cfg.embed_dim, tcfg.center_lr)
            for _ in range(model_cfg.p)
        ]

    n_batches = tcfg.batches_per_epoch or _auto_batches(len(dataset), tcfg.batch_size)
    hist = TrainHistory()
    step = 0
    for epoch in range(tcfg.epochs):
        lr = tcfg.lr_at(epoch)
        start = len(hist)
        for _ in range(n_batches):
            if tcfg.sampler == "paired":
                mb = sample_batch(index, tcfg.L, tcfg.T, rng)
            else:
                mb = legacy_sample_batch(index, tcfg.batch_size, rng)
            rows = np.array([row_of[int(i)] for i in mb.sample_ids])
            labels = np.array([class_of[int(i)] for i in mb.labels])
            ce, metric, total, grads = loss_and_grads(
                params, model_cfg, tcfg, dataset.features[rows], labels, mb.modalities, center_states
            )
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at step {step} (epoch {epoch}, lr {lr}): ce={ce}, metric={metric}"
                )
            for name in params:
                params[name], velocity[name] = sgd_momentum_step(
                    params[name], velocity[name], grads[name], lr, tcfg.momentum
                )
            hist.step.append(step)
            hist.epoch.append(epoch)
            hist.ce.append(ce)
            hist.hc.append(metric)
            hist.total.append(total)
            hist.lr.append(lr)
            step += 1
        hist.epoch_ce.append(float(np.mean(hist.ce[start:])))
        hist.epoch_hc.append(float(np.mean(hist.hc[start:])))
        hist.epoch_total.append(float(np.mean(hist.total[start:])))
        if heldout is not None:
            hist.epoch_center_distance.append(center_distance_probe(params, model_cfg, heldout))
        log.debug("epoch %d: ce=%.4f hc=%.4f", epoch, hist.epoch_ce[-1], hist.epoch_hc[-1])
    return params, hist
