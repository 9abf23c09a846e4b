"""Minibatch training with Adam, early stopping on validation micro-F, and inference."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..evaluation import apply_thresholds, label_based
from ..numeric import AdamState, Tensor, adam_step
from .config import ModelConfig
from .network import Graph, batch_loss, forward, init_params
from .text import EncodedCorpus

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    loss_trace: list[float] = field(default_factory=list)
    val_micro_f: list[float] = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0


def _check_labels(data: EncodedCorpus, n_labels: int) -> None:
    for pmid, labs in zip(data.pmids, data.labels):
        for j in labs:
            if not 0 <= j < n_labels:
                raise ValueError(f"document {pmid}: label ordinal {j} outside [0, {n_labels})")


def _batch(data: EncodedCorpus, idx, channels):
    return (
        {ch: data.tokens[ch][idx] for ch in channels},
        {ch: data.lengths[ch][idx] for ch in channels},
    )


def training_step(
    params: dict[str, Tensor],
    data: EncodedCorpus,
    idx: np.ndarray,
    graph: Graph,
    config: ModelConfig,
    state: AdamState,
    rng: Optional[np.random.Generator] = None,
    training: bool = True,
) -> float:
    for p in params.values():
        p.zero_grad()
    tokens, lengths = _batch(data, idx, config.channels)
    scores = forward(tokens, lengths, params, graph, config, training=training, rng=rng)
    loss = batch_loss(scores, [data.labels[i] for i in idx])
    loss.backward()
    adam_step(
        {k: p.data for k, p in params.items()},
        {k: p.grad for k, p in params.items() if p.grad is not None},
        state,
    )
    return float(loss.data)


def _snapshot(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in params.items()}


def train(
    train_data: EncodedCorpus,
    graph: Graph,
    config: ModelConfig,
    vocab_size: int,
    val_data: Optional[EncodedCorpus] = None,
    pretrained: Optional[np.ndarray] = None,
    on_epoch: Optional[Callable[[int, float, Optional[float]], None]] = None,
) -> TrainResult:
    """Train from scratch.

    With ``val_data`` the run stops once validation micro-F at 0.5
    thresholds has not improved for ``config.patience`` epochs, and the
    best-scoring parameters are returned.  Patience only starts counting
    after the first epoch with a positive micro-F, since a model that
    predicts nothing above 0.5 yet has nothing to stop on.  Without it every epoch runs and
    the final parameters are returned.
    """
    if len(train_data) == 0:
        raise ValueError("training set is empty")
    _check_labels(train_data, graph.n_labels)
    if val_data is not None:
        _check_labels(val_data, graph.n_labels)
    rng = np.random.default_rng(config.seed)
    params = init_params(config, vocab_size, graph.n_labels, rng, pretrained)
    state = AdamState(lr=config.lr, decay=config.decay)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    drop_rng = np.random.default_rng([config.seed, 2])

    result = TrainResult(params)
    best_f = -1.0
    best = _snapshot(params)
    stale = 0
    n = len(train_data)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            losses.append(training_step(params, train_data, idx, graph, config, state, drop_rng) * len(idx))
        state.end_epoch()
        epoch_loss = float(sum(losses) / n)
        result.loss_trace.append(epoch_loss)
        result.epochs_run = epoch
        val_f = None
        if val_data is not None and len(val_data):
            scores = predict(val_data, params, graph, config)
            val_f = label_based(val_data.labels, apply_thresholds(scores, 0.5), graph.n_labels)["MiF"]
            result.val_micro_f.append(val_f)
            if val_f > best_f:
                best_f, best, stale = val_f, _snapshot(params), 0
                result.best_epoch = epoch
            elif best_f > 0.0:
                stale += 1
        log.info("epoch %d loss %.5f val MiF %s", epoch, epoch_loss, val_f)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss, val_f)
        if val_f is not None and stale >= config.patience:
            break
    if val_data is not None and len(val_data):
        for k, v in best.items():
            params[k].data = v
    else:
        result.best_epoch = result.epochs_run
    return result


def predict(
    data: EncodedCorpus,
    params: dict[str, Tensor],
    graph: Graph,
    config: ModelConfig,
    batch_size: Optional[int] = None,
) -> np.ndarray:
    """Inference-mode scores ``(N, L)`` in input order."""
    bs = batch_size or max(config.batch_size, 32)
    frozen = {k: Tensor(p.data) for k, p in params.items()}
    out = np.zeros((len(data), graph.n_labels))
    for start in range(0, len(data), bs):
        idx = np.arange(start, min(start + bs, len(data)))
        tokens, lengths = _batch(data, idx, config.channels)
        out[idx] = forward(tokens, lengths, frozen, graph, config, training=False).data
    return out
