"""Forward pass of the document/label-graph indexing model.

Shapes, for a batch of B documents and L labels:

* channel tokens ``(B, l)`` -> embeddings ``(B, l, d)`` -> three dilated
  convolutions with ReLU ``(B, l', w)`` -> projection ``(B, l', d)``
* label matrix ``H = v + relu(A relu(A v W0) W1)``, ``(L, d)``
* per channel: attention ``softmax_over_positions(H D^T)`` ``(B, L, l')``,
  content ``alpha D`` ``(B, L, d)``
* scores ``sigmoid(sum_d (sum_C content_C) * H + bias)``, ``(B, L)``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, MutableMapping, Optional, Sequence

import numpy as np

from ..numeric import (
    Tensor,
    bce_loss,
    const_matmul,
    dilated_conv1d,
    dropout,
    embed,
    identity,
    masked_fill,
    matmul,
    mul,
    relu,
    sigmoid,
    softmax,
    swap_last,
    total,
)
from .config import ModelConfig

Params = MutableMapping[str, Tensor]


def conv_name(channel: str, layer: int) -> str:
    return f"conv.{channel}.{layer}"


def proj_name(channel: str) -> str:
    return f"proj.{channel}"


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _he(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def init_params(
    config: ModelConfig,
    vocab_size: int,
    n_labels: int,
    rng: np.random.Generator,
    pretrained: Optional[np.ndarray] = None,
) -> dict[str, Tensor]:
    """Fresh parameters; ``pretrained`` rows (NaN = missing) override the uniform init."""
    d, w, s = config.d, config.width, config.kernel_size
    dtype = np.dtype(config.dtype)
    emb = rng.uniform(-config.init_scale, config.init_scale, size=(vocab_size, d))
    if pretrained is not None:
        have = ~np.isnan(pretrained).any(axis=1)
        emb[have] = pretrained[have]
    emb[0] = 0.0
    p: dict[str, np.ndarray] = {"embedding": emb}
    for ch in config.channels:
        c_in = d
        for k in range(len(config.dilations)):
            p[conv_name(ch, k)] = _he(rng, (s, c_in, w), s * c_in)
            c_in = w
        p[proj_name(ch)] = _glorot(rng, (w, d), w, d)
    p["gcn.0"] = _glorot(rng, (d, d), d, d)
    p["gcn.1"] = _glorot(rng, (d, d), d, d)
    p["bias"] = np.zeros(n_labels)
    return {k: Tensor(v.astype(dtype), requires_grad=True, name=k) for k, v in p.items()}


def valid_positions(lengths: np.ndarray, n_positions: int) -> np.ndarray:
    """Output position t is attended iff input token t is a real token."""
    lengths = np.asarray(lengths)
    return np.arange(n_positions)[None, :] < np.maximum(lengths, 1)[:, None]


def encode_channel(
    token_ids: np.ndarray,
    lengths: np.ndarray,
    params: Mapping[str, Tensor],
    config: ModelConfig,
    channel: str,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Tensor, np.ndarray]:
    """Return channel features ``(B, l', d)`` and the attendable-position mask."""
    token_ids = np.atleast_2d(token_ids)
    lengths = np.atleast_1d(lengths)
    if np.any(lengths < 1):
        raise ValueError(f"channel {channel}: empty sequence")
    x = embed(token_ids, params["embedding"])
    x = dropout(x, config.dropout, rng, training)
    real = (np.arange(token_ids.shape[1])[None, :] < lengths[:, None]).astype(x.data.dtype)
    x = mul(x, real[..., None])
    for k, dil in enumerate(config.dilations):
        x = relu(dilated_conv1d(x, params[conv_name(channel, k)], dil))
    feats = matmul(x, params[proj_name(channel)])
    return feats, valid_positions(lengths, feats.shape[1])


def label_features(labels, adjacency, params: Mapping[str, Tensor], activation: str = "relu") -> Tensor:
    """Two graph-convolution layers over the label graph plus the residual ``v``."""
    act = relu if activation == "relu" else identity
    v = labels if isinstance(labels, Tensor) else Tensor(labels)
    h = v
    for name in ("gcn.0", "gcn.1"):
        h = act(const_matmul(adjacency, matmul(h, params[name])))
    return v + h


def attend(feats: Tensor, label_matrix: Tensor, valid: Optional[np.ndarray] = None) -> tuple[Tensor, Tensor]:
    """Label-wise attention; returns content ``(B, L, d)`` and weights ``(B, L, l')``."""
    if feats.shape[-2] < 1:
        raise ValueError("attention over zero positions")
    logits = matmul(label_matrix, swap_last(feats))
    if valid is not None:
        logits = masked_fill(logits, np.asarray(valid)[..., None, :], -np.inf)
    alpha = softmax(logits, axis=-1)
    return matmul(alpha, feats), alpha


def fuse_and_score(contents: Sequence[Tensor], label_matrix: Tensor, bias: Tensor) -> Tensor:
    doc = contents[0]
    for c in contents[1:]:
        doc = doc + c
    return sigmoid(total(mul(doc, label_matrix), axis=-1) + bias)


@dataclass
class Graph:
    """The label-side inputs shared by every document."""

    labels: np.ndarray  # (L, d) initial label vectors
    adjacency: object  # (L, L) dense array or scipy sparse matrix

    @property
    def n_labels(self) -> int:
        return self.labels.shape[0]


def forward(
    tokens: Mapping[str, np.ndarray],
    lengths: Mapping[str, np.ndarray],
    params: Mapping[str, Tensor],
    graph: Graph,
    config: ModelConfig,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Scores ``(B, L)`` for a batch given per-channel token ids and lengths."""
    H = label_features(graph.labels.astype(config.dtype), graph.adjacency, params, config.gcn_activation)
    contents = []
    for ch in config.channels:
        feats, valid = encode_channel(tokens[ch], lengths[ch], params, config, ch, training, rng)
        content, _ = attend(feats, H, valid)
        contents.append(content)
    return fuse_and_score(contents, H, params["bias"])


def batch_loss(scores: Tensor, labels: Sequence[frozenset[int]]) -> Tensor:
    """Label-summed binary cross-entropy, averaged over the documents in the batch."""
    y = np.zeros(scores.shape, dtype=scores.data.dtype)
    for i, labs in enumerate(labels):
        for j in labs:
            y[i, j] = 1.0
    return mul(bce_loss(scores, y), 1.0 / scores.shape[0])
