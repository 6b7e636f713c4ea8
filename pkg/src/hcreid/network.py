"""Two-stream stripe-pooling embedding network.

Per sample, routed by modality::

    Z  = X @ branch{m}.weight + branch{m}.bias        (every spatial location)
    U  = leaky(Z)
    P_s = mean of U over the rows of stripe s         (p stripes of H/p rows)
    E_s = leaky(P_s @ reduce.weight[s] + reduce.bias[s])   shared by both branches
    N_s = E_s / |E_s|                                 (fed to HC-style losses)
    logits_s = E_s @ classifier.weight[s] + classifier.bias[s]

The retrieval descriptor is ``concat(N_1, ..., N_p)``.  Parameters live in a
plain ``dict`` of float64 arrays; the reduction layer is a single entry, so
both branches always read the same weights.
"""

import base64
import json
from dataclasses import asdict, dataclass

import numpy as np

from hcreid.linalg import (
    glorot_uniform,
    l2_normalize,
    l2_normalize_backward,
    leaky_relu,
    leaky_relu_backward,
)

VISIBLE, INFRARED = 1, 2
BRANCHES = {VISIBLE: "branch1", INFRARED: "branch2"}


@dataclass(frozen=True)
class ModelConfig:
    p: int = 6
    input_shape: tuple = (12, 4, 8)
    branch_hidden: int = 32
    embed_dim: int = 64
    n_classes: int = 24
    leaky_slope: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        H = self.input_shape[0]
        if min(self.p, self.branch_hidden, self.embed_dim, self.n_classes, *self.input_shape) < 1:
            raise ValueError("all model sizes must be positive")
        if H % self.p:
            raise ValueError(f"H={H} is not divisible by p={self.p}")

    @property
    def descriptor_dim(self):
        return self.p * self.embed_dim

    def to_dict(self):
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d


def param_shapes(cfg):
    _, _, C = cfg.input_shape
    p, h, d, n = cfg.p, cfg.branch_hidden, cfg.embed_dim, cfg.n_classes
    return {
        "branch1.weight": (C, h),
        "branch1.bias": (h,),
        "branch2.weight": (C, h),
        "branch2.bias": (h,),
        "reduce.weight": (p, h, d),
        "reduce.bias": (p, d),
        "classifier.weight": (p, d, n),
        "classifier.bias": (p, n),
    }


def init_params(cfg, seed=0):
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            fan_in, fan_out = shape[-2], shape[-1]
            params[name] = glorot_uniform(rng, fan_in, fan_out, shape)
    return params


def check_params(params, cfg):
    expected = param_shapes(cfg)
    if set(params) != set(expected):
        raise ValueError(f"parameter names {sorted(params)} do not match {sorted(expected)}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ValueError(f"{name}: shape {params[name].shape}, expected {shape}")


@dataclass
class ForwardTrace:
    inputs: np.ndarray  # (B, H, W, C)
    modalities: np.ndarray  # (B,)
    branch_pre: np.ndarray  # (B, H, W, h)
    pooled: np.ndarray  # (B, p, h)
    embed_pre: np.ndarray  # (B, p, d)
    embed: np.ndarray  # (B, p, d)
    normalized: np.ndarray  # (B, p, d)
    logits: np.ndarray  # (B, p, n)
    cfg: ModelConfig


@dataclass
class EmbeddingSet:
    embeddings: np.ndarray  # (B, p, d), post-activation
    normalized: np.ndarray  # (B, p, d), unit norm per stripe
    logits: np.ndarray  # (B, p, n_classes)

    def descriptors(self):
        B = self.normalized.shape[0]
        return self.normalized.reshape(B, -1)


def _check_inputs(cfg, inputs, modalities):
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    mods = np.atleast_1d(np.asarray(modalities, dtype=np.int64))
    if x.shape[1:] != cfg.input_shape:
        raise ValueError(f"input shape {x.shape[1:]} does not match config {cfg.input_shape}")
    if len(mods) != len(x):
        raise ValueError("one modality tag per input required")
    if not np.all(np.isin(mods, (VISIBLE, INFRARED))):
        raise ValueError("modality tags must be 1 or 2")
    return x, mods


def forward(params, cfg, inputs, modalities):
    """Run the network on a batch; returns ``(EmbeddingSet, ForwardTrace)``."""
    x, mods = _check_inputs(cfg, inputs, modalities)
    B, H, W, _ = x.shape
    p, slope = cfg.p, cfg.leaky_slope

    z = np.empty((B, H, W, cfg.branch_hidden))
    for mod, name in BRANCHES.items():
        sel = mods == mod
        if sel.any():
            z[sel] = x[sel] @ params[f"{name}.weight"] + params[f"{name}.bias"]
    u = leaky_relu(z, slope)
    pooled = u.reshape(B, p, H // p, W, -1).mean(axis=(2, 3))
    embed_pre = np.einsum("bph,phd->bpd", pooled, params["reduce.weight"]) + params["reduce.bias"]
    embed = leaky_relu(embed_pre, slope)
    normalized = l2_normalize(embed)
    logits = np.einsum("bpd,pdn->bpn", embed, params["classifier.weight"]) + params["classifier.bias"]

    trace = ForwardTrace(x, mods, z, pooled, embed_pre, embed, normalized, logits, cfg)
    return EmbeddingSet(embed, normalized, logits), trace


def backward(params, cfg, trace, grad_logits=None, grad_normalized=None):
    """Parameter gradients given upstream grads w.r.t. logits and normalized embeddings.

    Either upstream may be ``None`` (treated as zero).  The shared reduction
    layer accumulates contributions from samples of both modalities.
    """
    if trace.cfg != cfg:
        raise ValueError("trace was produced with a different model config")
    B, H, W, _ = trace.inputs.shape
    p, slope = cfg.p, cfg.leaky_slope
    if grad_logits is None:
        grad_logits = np.zeros_like(trace.logits)
    if grad_normalized is None:
        grad_normalized = np.zeros_like(trace.normalized)
    if grad_logits.shape != trace.logits.shape or grad_normalized.shape != trace.normalized.shape:
        raise ValueError("upstream gradient shapes do not match the trace")

    grads = {}
    grads["classifier.weight"] = np.einsum("bpd,bpn->pdn", trace.embed, grad_logits)
    grads["classifier.bias"] = grad_logits.sum(axis=0)
    d_embed = np.einsum("bpn,pdn->bpd", grad_logits, params["classifier.weight"])
    d_embed += l2_normalize_backward(trace.embed, grad_normalized)
    d_pre = leaky_relu_backward(trace.embed_pre, d_embed, slope)
    grads["reduce.weight"] = np.einsum("bph,bpd->phd", trace.pooled, d_pre)
    grads["reduce.bias"] = d_pre.sum(axis=0)
    d_pooled = np.einsum("bpd,phd->bph", d_pre, params["reduce.weight"])

    rows = H // p
    d_u = np.broadcast_to(d_pooled[:, :, None, None, :] / (rows * W), (B, p, rows, W, d_pooled.shape[-1]))
    d_z = leaky_relu_backward(trace.branch_pre, d_u.reshape(B, H, W, -1), slope)
    C = trace.inputs.shape[-1]
    for mod, name in BRANCHES.items():
        sel = trace.modalities == mod
        xs = trace.inputs[sel].reshape(-1, C)
        dz = d_z[sel].reshape(-1, d_z.shape[-1])
        grads[f"{name}.weight"] = xs.T @ dz
        grads[f"{name}.bias"] = dz.sum(axis=0)
    return grads


def extract_descriptor(params, cfg, inputs, modalities):
    """Concatenated per-stripe unit embeddings, stripe order top to bottom.

    Accepts a single ``(H, W, C)`` map with a scalar modality or a batch;
    returns ``(p*d,)`` or ``(B, p*d)`` accordingly.
    """
    single = np.ndim(inputs) == 3
    emb, _ = forward(params, cfg, inputs, modalities)
    desc = emb.descriptors()
    return desc[0] if single else desc


CHECKPOINT_FORMAT = "hcreid-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params, cfg, meta=None):
    """JSON container; arrays are stored as base64 little-endian float64 bytes."""
    check_params(params, cfg)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": cfg.to_dict(),
        "params": {
            name: {
                "shape": list(arr.shape),
                "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
            }
            for name, arr in sorted(params.items())
        },
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Returns ``(params, cfg, meta)``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not an {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    cfg = ModelConfig(**doc["model_config"])
    params = {}
    for name, entry in doc["params"].items():
        raw = base64.b64decode(entry["data"])
        params[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(entry["shape"])
    check_params(params, cfg)
    return params, cfg, doc.get("meta", {})
