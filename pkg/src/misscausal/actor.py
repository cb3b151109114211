"""Self-attention feature encoder, bilinear edge decoder and graph sampler.

Each attribute (column of the imputed minibatch) is one token; its content
is that column's n sample values. There are no positional encodings, so
permuting the attributes permutes the outputs identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numcore as nc
from .imputer import glorot, zeros_param
from .numcore import RngStream, Tensor

DIAGONAL_LOGIT = -1e9


@dataclass
class EncoderLayer:
    Wq: Tensor
    Wk: Tensor
    Wv: Tensor
    Wo: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    F1: Tensor
    f1: Tensor
    F2: Tensor
    f2: Tensor
    ln2_g: Tensor
    ln2_b: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.Wq, self.Wk, self.Wv, self.Wo, self.ln1_g, self.ln1_b,
                self.F1, self.f1, self.F2, self.f2, self.ln2_g, self.ln2_b]


@dataclass
class FeatNetParams:
    P: Tensor  # (n_batch, k) input projection
    p: Tensor
    layers: list[EncoderLayer]
    heads: int

    @property
    def n_batch(self) -> int:
        return self.P.shape[0]

    @property
    def k(self) -> int:
        return self.P.shape[1]

    def tensors(self) -> list[Tensor]:
        out = [self.P, self.p]
        for layer in self.layers:
            out.extend(layer.tensors())
        return out

    def named(self) -> dict[str, Tensor]:
        named = {"P": self.P, "p": self.p}
        keys = ("Wq", "Wk", "Wv", "Wo", "ln1_g", "ln1_b", "F1", "f1", "F2", "f2", "ln2_g", "ln2_b")
        for i, layer in enumerate(self.layers):
            for key, t in zip(keys, layer.tensors()):
                named[f"layer{i}.{key}"] = t
        return named


def init_featnet(n_batch: int, rng: RngStream, k: int = 64, layers: int = 2,
                 heads: int = 4, ff: int = 128) -> FeatNetParams:
    if k % heads:
        raise ValueError(f"feature width {k} is not divisible by {heads} heads")
    blocks = []
    for i in range(layers):
        r = rng.child(f"layer{i}")
        blocks.append(EncoderLayer(
            glorot(k, k, r), glorot(k, k, r), glorot(k, k, r), glorot(k, k, r),
            Tensor(np.ones(k), requires_grad=True), zeros_param(k),
            glorot(k, ff, r), zeros_param(ff), glorot(ff, k, r), zeros_param(k),
            Tensor(np.ones(k), requires_grad=True), zeros_param(k),
        ))
    return FeatNetParams(glorot(n_batch, k, rng.child("proj")), zeros_param(k), blocks, heads)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    mu = nc.mean(x, axis=-1, keepdims=True)
    xc = x - mu
    var = nc.mean(xc * xc, axis=-1, keepdims=True)
    return xc * nc.power(var + eps, -0.5) * gain + bias


def self_attention(x: Tensor, layer: EncoderLayer, heads: int) -> Tensor:
    d, k = x.shape
    dh = k // heads

    def split(t: Tensor) -> Tensor:  # (d, k) -> (heads, d, dh)
        return nc.transpose(nc.reshape(t, (d, heads, dh)), (1, 0, 2))

    q, kk, v = split(x @ layer.Wq), split(x @ layer.Wk), split(x @ layer.Wv)
    att = nc.softmax(nc.scale(q @ nc.transpose(kk, (0, 2, 1)), 1.0 / np.sqrt(dh)))
    out = nc.reshape(nc.transpose(att @ v, (1, 0, 2)), (d, k))
    return out @ layer.Wo


def featnet_forward(X_in, params: FeatNetParams) -> Tensor:
    """Map a complete (n x d) batch to one k-vector per attribute: (d x k)."""
    X_in = nc.as_tensor(X_in)
    if X_in.ndim != 2 or X_in.shape[0] != params.n_batch:
        raise nc.ShapeError("featnet_forward", X_in.shape, (params.n_batch, "d"),
                            detail="batch length must match the input projection")
    x = nc.transpose(X_in) @ params.P + params.p
    for layer in params.layers:
        x = layer_norm(x + self_attention(x, layer, params.heads), layer.ln1_g, layer.ln1_b)
        ff = nc.relu(x @ layer.F1 + layer.f1) @ layer.F2 + layer.f2
        x = layer_norm(x + ff, layer.ln2_g, layer.ln2_b)
    return x


# -- decoder -------------------------------------------------------------------
@dataclass
class DecoderParams:
    W1: Tensor  # (h, k)
    W2: Tensor  # (h, k)
    U: Tensor  # (h, 1)
    bias: Tensor  # scalar edge bias shared by every logit

    def tensors(self) -> list[Tensor]:
        return [self.W1, self.W2, self.U, self.bias]

    def named(self) -> dict[str, Tensor]:
        return {"W1": self.W1, "W2": self.W2, "U": self.U, "bias": self.bias}


def init_decoder(k: int, rng: RngStream, hidden: int = 64, bias: float = 0.0) -> DecoderParams:
    return DecoderParams(
        glorot(k, hidden, rng, shape=(hidden, k)),
        glorot(k, hidden, rng, shape=(hidden, k)),
        glorot(hidden, 1, rng, shape=(hidden, 1)),
        Tensor(np.array(float(bias)), requires_grad=True),
    )


def decoder_logits(feat, params: DecoderParams) -> Tensor:
    """``logits[i, j] = U^T tanh(W1 feat_i + W2 feat_j) + bias`` off the
    diagonal; the diagonal is pinned far negative so its probability is 0."""
    feat = nc.as_tensor(feat)
    d, k = feat.shape
    if params.W1.shape[1] != k or params.W2.shape != params.W1.shape:
        raise nc.ShapeError("decoder_logits", feat.shape, params.W1.shape, params.W2.shape)
    h = params.W1.shape[0]
    src = nc.reshape(feat @ nc.transpose(params.W1), (d, 1, h))
    dst = nc.reshape(feat @ nc.transpose(params.W2), (1, d, h))
    g = nc.reshape(nc.tanh(src + dst) @ params.U, (d, d))
    off = 1.0 - np.eye(d)
    return (g + params.bias) * off + DIAGONAL_LOGIT * np.eye(d)


# -- sampling ------------------------------------------------------------------
@dataclass
class GraphSample:
    A: np.ndarray  # int8 (d, d)
    P: np.ndarray
    log_prob: Tensor  # scalar
    entropy: Tensor  # scalar
    extra: dict = field(default_factory=dict)


def edge_log_prob(logits: Tensor, A: np.ndarray) -> Tensor:
    """Sum over off-diagonal pairs of log Bernoulli(A_ij; sigmoid(logit_ij)).

    Computed through log-sigmoid so it stays finite at saturation and its
    gradient with respect to the logits is exactly ``A - P``.
    """
    d = A.shape[-1]
    off = 1.0 - np.eye(d)
    A = np.asarray(A, dtype=np.float64)
    terms = nc.log_sigmoid(logits) * (A * off) + nc.log_sigmoid(-logits) * ((1.0 - A) * off)
    axes = (-2, -1)
    return nc.sum_(terms, axis=axes)


def edge_entropy(logits: Tensor) -> Tensor:
    """Sum of Bernoulli entropies over off-diagonal pairs, ``softplus(l) - l*sigmoid(l)``."""
    d = logits.shape[-1]
    off = 1.0 - np.eye(d)
    h = -nc.log_sigmoid(-logits) - logits * nc.sigmoid(logits)
    return nc.sum_(h * off)


def edge_probs(logits) -> np.ndarray:
    return nc.sigmoid(nc.as_tensor(logits).data).data * (1.0 - np.eye(logits.shape[-1]))


def sample_graph(logits, rng: RngStream) -> GraphSample:
    """Draw every off-diagonal edge independently from Bernoulli(sigmoid(logit))."""
    logits = nc.as_tensor(logits)
    d = logits.shape[0]
    P = edge_probs(logits)
    A = (rng.random((d, d)) < P).astype(np.int8)
    np.fill_diagonal(A, 0)
    return GraphSample(A, P, edge_log_prob(logits, A), edge_entropy(logits))


def sample_graphs(logits, rng: RngStream, count: int) -> tuple[np.ndarray, np.ndarray]:
    """``count`` independent adjacency draws (count, d, d) plus the probability matrix."""
    logits = nc.as_tensor(logits)
    d = logits.shape[0]
    P = edge_probs(logits)
    A = (rng.random((count, d, d)) < P).astype(np.int8)
    A[:, np.arange(d), np.arange(d)] = 0
    return A, P
