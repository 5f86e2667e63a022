"""Naturalness predictor over frozen speech-encoder layer embeddings.

The model fuses the 13 per-layer 768-dim time-averaged activations with a
learned weighted average (normalized absolute weights), feeds the fused
vector through a 768-128-128 MLP with ReLU and inverted dropout, and maps
a final sigmoid output onto the 1-5 MOS range.  Forward, loss, gradients,
and the two-rate ADAM update are implemented directly in numpy; gradients
are exact (checked against central finite differences in the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .embio import EMB_DIM, N_LAYERS

HIDDEN = 128

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class ModelParams:
    """All trainable tensors; 13 fusion weights plus three affine layers."""

    alphas: np.ndarray  # (13,)
    w1: np.ndarray  # (768, 128)
    b1: np.ndarray  # (128,)
    w2: np.ndarray  # (128, 128)
    b2: np.ndarray  # (128,)
    w3: np.ndarray  # (128,)
    b3: np.ndarray  # (1,)

    def copy(self) -> "ModelParams":
        return _map(np.copy, self)

    def count(self) -> int:
        return sum(getattr(self, f.name).size for f in fields(self))

    def as_vector(self) -> np.ndarray:
        """Canonical flat order: alphas, w1 (row-major), b1, w2, b2, w3, b3."""
        return np.concatenate([getattr(self, f.name).ravel() for f in fields(self)])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "ModelParams":
        shapes = [(N_LAYERS,), (EMB_DIM, HIDDEN), (HIDDEN,), (HIDDEN, HIDDEN), (HIDDEN,), (HIDDEN,), (1,)]
        total = sum(int(np.prod(s)) for s in shapes)
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (total,):
            raise ValueError(f"expected parameter vector of length {total}, got {vec.shape}")
        parts = []
        offset = 0
        for shape in shapes:
            size = int(np.prod(shape))
            parts.append(vec[offset : offset + size].reshape(shape).copy())
            offset += size
        return cls(*parts)


def _map(fn, *params: ModelParams) -> ModelParams:
    return ModelParams(
        *[fn(*[getattr(p, f.name) for p in params]) for f in fields(ModelParams)]
    )


def zeros_like_params() -> ModelParams:
    return ModelParams(
        alphas=np.zeros(N_LAYERS),
        w1=np.zeros((EMB_DIM, HIDDEN)),
        b1=np.zeros(HIDDEN),
        w2=np.zeros((HIDDEN, HIDDEN)),
        b2=np.zeros(HIDDEN),
        w3=np.zeros(HIDDEN),
        b3=np.zeros(1),
    )


def init_params(seed: int = 0) -> ModelParams:
    """He-uniform affine weights, zero biases, equal fusion weights 1/13."""
    rng = np.random.default_rng(seed)

    def he(fan_in, shape):
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    return ModelParams(
        alphas=np.full(N_LAYERS, 1.0 / N_LAYERS),
        w1=he(EMB_DIM, (EMB_DIM, HIDDEN)),
        b1=np.zeros(HIDDEN),
        w2=he(HIDDEN, (HIDDEN, HIDDEN)),
        b2=np.zeros(HIDDEN),
        w3=he(HIDDEN, HIDDEN),
        b3=np.zeros(1),
    )


def weighted_layer_average(emb: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Fuse 13 layer vectors: sum_i |a_i| f_i / sum_i |a_i|."""
    emb = np.asarray(emb, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if emb.shape != (N_LAYERS, EMB_DIM):
        raise ValueError(f"expected ({N_LAYERS}, {EMB_DIM}) embedding, got {emb.shape}")
    weights = np.abs(alphas)
    total = weights.sum()
    if total == 0.0:
        raise ValueError("all fusion weights are zero")
    # Normalize before the dot product: a one-hot alpha then selects its
    # layer bit-exactly (w/w == 1.0).
    return (weights / total) @ emb


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def draw_masks(rng: np.random.Generator, batch_size: int, dropout_p: float):
    """Inverted-dropout masks for both hidden layers: 0 or 1/(1-p)."""
    if dropout_p == 0.0:
        return None
    keep = 1.0 - dropout_p
    m1 = (rng.random((batch_size, HIDDEN)) < keep) / keep
    m2 = (rng.random((batch_size, HIDDEN)) < keep) / keep
    return m1, m2


def _forward_batch(params: ModelParams, embs: np.ndarray, masks=None):
    """Shared forward pass; returns normalized output o in (0, 1) plus cache."""
    embs = np.asarray(embs, dtype=np.float64)
    if embs.ndim != 3 or embs.shape[1:] != (N_LAYERS, EMB_DIM):
        raise ValueError(f"expected (batch, {N_LAYERS}, {EMB_DIM}) embeddings, got {embs.shape}")
    weights = np.abs(params.alphas)
    total = weights.sum()
    if total == 0.0:
        raise ValueError("all fusion weights are zero")
    fused = np.einsum("i,bij->bj", weights / total, embs)
    z1 = fused @ params.w1 + params.b1
    a1 = np.maximum(z1, 0.0)
    d1 = a1 if masks is None else a1 * masks[0]
    z2 = d1 @ params.w2 + params.b2
    a2 = np.maximum(z2, 0.0)
    d2 = a2 if masks is None else a2 * masks[1]
    z3 = d2 @ params.w3 + params.b3[0]
    o = _sigmoid(z3)
    cache = (embs, fused, total, z1, d1, z2, d2, o)
    return o, cache


def predict(params: ModelParams, emb: np.ndarray) -> float:
    """Deterministic eval-mode MOS prediction, strictly inside (1, 5)."""
    o, _ = _forward_batch(params, np.asarray(emb)[None, :, :])
    return float(1.0 + 4.0 * o[0])


def predict_batch(params: ModelParams, embs: np.ndarray) -> np.ndarray:
    o, _ = _forward_batch(params, embs)
    return 1.0 + 4.0 * o


def normalize_labels(labels: np.ndarray) -> np.ndarray:
    """Map MOS labels from [1, 5] to the [0, 1] training scale."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size and (labels.min() < 1.0 or labels.max() > 5.0):
        raise ValueError("labels must lie in [1, 5]")
    return (labels - 1.0) / 4.0


def batch_loss(params: ModelParams, embs: np.ndarray, labels: np.ndarray, masks=None) -> float:
    """Mean squared error between normalized output and normalized label."""
    if len(labels) == 0:
        raise ValueError("empty minibatch")
    o, _ = _forward_batch(params, embs, masks)
    y = normalize_labels(labels)
    return float(np.mean((o - y) ** 2))


def loss_and_grads(params: ModelParams, embs: np.ndarray, labels: np.ndarray, masks=None):
    """Loss plus exact gradients for every parameter via manual backprop.

    The fusion quotient is differentiated through |a_i| with subgradient 0
    at a_i = 0: d f / d a_i = sign(a_i) (f_i - f) / sum_j |a_j|.
    """
    if len(labels) == 0:
        raise ValueError("empty minibatch")
    o, cache = _forward_batch(params, embs, masks)
    embs64, fused, total, z1, d1, z2, d2, _ = cache
    y = normalize_labels(labels)
    batch = len(y)
    loss = float(np.mean((o - y) ** 2))

    do = 2.0 * (o - y) / batch
    dz3 = do * o * (1.0 - o)
    g_w3 = d2.T @ dz3
    g_b3 = np.array([dz3.sum()])
    dd2 = np.outer(dz3, params.w3)
    da2 = dd2 if masks is None else dd2 * masks[1]
    dz2 = da2 * (z2 > 0.0)
    g_w2 = d1.T @ dz2
    g_b2 = dz2.sum(axis=0)
    dd1 = dz2 @ params.w2.T
    da1 = dd1 if masks is None else dd1 * masks[0]
    dz1 = da1 * (z1 > 0.0)
    g_w1 = fused.T @ dz1
    g_b1 = dz1.sum(axis=0)
    dfused = dz1 @ params.w1.T  # (batch, 768)

    sign = np.sign(params.alphas)
    # d f / d a_i dotted with upstream: sign_i / s * (df . f_i - df . f)
    per_layer = np.einsum("bj,bij->bi", dfused, embs64)  # (batch, 13)
    common = np.einsum("bj,bj->b", dfused, fused)  # (batch,)
    g_alphas = sign * (per_layer - common[:, None]).sum(axis=0) / total

    grads = ModelParams(g_alphas, g_w1, g_b1, g_w2, g_b2, g_w3, g_b3)
    return loss, grads


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0

    @classmethod
    def fresh(cls) -> "AdamState":
        return cls(m=zeros_like_params(), v=zeros_like_params(), t=0)


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr_alpha: float = 0.001,
    lr_mlp: float = 0.0001,
) -> tuple[ModelParams, AdamState]:
    """Bias-corrected ADAM with separate rates for fusion weights and MLP."""
    for f in fields(ModelParams):
        if getattr(params, f.name).shape != getattr(grads, f.name).shape:
            raise ValueError(f"gradient shape mismatch on {f.name}")
    t = state.t + 1
    m = _map(lambda mm, g: ADAM_BETA1 * mm + (1 - ADAM_BETA1) * g, state.m, grads)
    v = _map(lambda vv, g: ADAM_BETA2 * vv + (1 - ADAM_BETA2) * g * g, state.v, grads)
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t

    def update(lr):
        return lambda p, mm, vv: p - lr * (mm / bc1) / (np.sqrt(vv / bc2) + ADAM_EPS)

    new = ModelParams(
        alphas=update(lr_alpha)(params.alphas, m.alphas, v.alphas),
        w1=update(lr_mlp)(params.w1, m.w1, v.w1),
        b1=update(lr_mlp)(params.b1, m.b1, v.b1),
        w2=update(lr_mlp)(params.w2, m.w2, v.w2),
        b2=update(lr_mlp)(params.b2, m.b2, v.b2),
        w3=update(lr_mlp)(params.w3, m.w3, v.w3),
        b3=update(lr_mlp)(params.b3, m.b3, v.b3),
    )
    return new, AdamState(m=m, v=v, t=t)
