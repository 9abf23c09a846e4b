"""Self-contained model files: parameters plus everything inference needs.

A bundle is a checkpoint whose tensors are the model parameters under
their own names plus ``graph.labels`` (the initial label matrix) and
``graph.rows`` / ``graph.cols`` (adjacency non-zeros, stored as floats).
The meta block carries the model config, the word vocabulary and the
label identifiers in ordinal order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..numeric import CheckpointError, Tensor, load_checkpoint, save_checkpoint
from .config import ModelConfig
from .network import Graph
from .text import WordVocab

FORMAT = "meshidx-model/1"


class VocabularyMismatch(ValueError):
    pass


@dataclass
class ModelBundle:
    params: dict[str, Tensor]
    config: ModelConfig
    words: WordVocab
    label_uis: list[str]
    graph: Graph

    def check_labels(self, label_uis: Sequence[str], source: str = "label vocabulary") -> None:
        if list(label_uis) != self.label_uis:
            theirs, ours = set(label_uis), set(self.label_uis)
            detail = (
                f"{len(theirs - ours)} unknown, {len(ours - theirs)} missing"
                if theirs != ours
                else "same descriptors in a different order"
            )
            raise VocabularyMismatch(f"{source} does not match the model's {len(self.label_uis)} labels ({detail})")


def save_bundle(path, bundle: ModelBundle) -> None:
    coo = sp.coo_matrix(bundle.graph.adjacency)
    tensors = {k: p.data for k, p in bundle.params.items()}
    tensors["graph.labels"] = np.asarray(bundle.graph.labels, dtype=np.float64)
    tensors["graph.rows"] = coo.row.astype(np.float64)
    tensors["graph.cols"] = coo.col.astype(np.float64)
    tensors["graph.values"] = coo.data.astype(np.float64)
    meta = {
        "format": FORMAT,
        "config": bundle.config.to_dict(),
        "words": bundle.words.tokens,
        "labels": bundle.label_uis,
    }
    save_checkpoint(path, tensors, meta)


def load_bundle(path, label_uis: Optional[Sequence[str]] = None) -> ModelBundle:
    """Load a bundle; with ``label_uis`` the stored labels must match exactly."""
    tensors, meta = load_checkpoint(path)
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a model bundle")
    config = ModelConfig.from_dict(meta["config"])
    uis = list(meta["labels"])
    n = len(uis)
    graph_keys = ("graph.labels", "graph.rows", "graph.cols", "graph.values")
    missing = [k for k in graph_keys if k not in tensors]
    if missing:
        raise CheckpointError(f"{path}: missing tensors {missing}")
    rows = tensors.pop("graph.rows").astype(np.int64)
    cols = tensors.pop("graph.cols").astype(np.int64)
    vals = tensors.pop("graph.values")
    adjacency = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    graph = Graph(tensors.pop("graph.labels"), adjacency)
    words = WordVocab(meta["words"])
    if tensors["embedding"].shape[0] != len(words):
        raise VocabularyMismatch(
            f"{path}: embedding has {tensors['embedding'].shape[0]} rows but the word vocabulary has {len(words)}"
        )
    if tensors["bias"].shape[0] != n or graph.labels.shape[0] != n:
        raise VocabularyMismatch(f"{path}: label count disagrees between parameters and label list")
    params = {k: Tensor(v, requires_grad=True, name=k) for k, v in tensors.items()}
    bundle = ModelBundle(params, config, words, uis, graph)
    if label_uis is not None:
        bundle.check_labels(label_uis)
    return bundle
