"""Glue from records and a descriptor vocabulary to a trained bundle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..corpus.records import ArticleRecord
from ..mesh_graph import MeshVocabulary, WordVectors, build_adjacency
from .bundle import ModelBundle
from .config import ModelConfig
from .labels import initial_embedding, label_matrix
from .network import Graph
from .text import EncodedCorpus, WordVocab, build_word_vocab, encode_records
from .training import TrainResult, predict, train


@dataclass
class Prepared:
    words: WordVocab
    graph: Graph
    embedding: np.ndarray
    label_uis: list[str]


def prepare(
    train_records: Sequence[ArticleRecord],
    mesh: MeshVocabulary,
    config: ModelConfig,
    vectors: Optional[WordVectors] = None,
) -> Prepared:
    words = build_word_vocab(train_records, config)
    emb = initial_embedding(config, words, vectors)
    v = label_matrix(mesh, words, emb, config)
    adj = build_adjacency(mesh)
    A = adj.normalized() if config.normalize_adjacency else adj.matrix
    return Prepared(words, Graph(v, A), emb, mesh.uis)


def encode(records: Sequence[ArticleRecord], prep: Prepared, config: ModelConfig) -> EncodedCorpus:
    index = {ui: i for i, ui in enumerate(prep.label_uis)}
    return encode_records(records, prep.words, config, index)


def fit(
    train_records: Sequence[ArticleRecord],
    mesh: MeshVocabulary,
    config: ModelConfig,
    val_records: Optional[Sequence[ArticleRecord]] = None,
    vectors: Optional[WordVectors] = None,
    on_epoch=None,
) -> tuple[ModelBundle, TrainResult]:
    prep = prepare(train_records, mesh, config, vectors)
    train_enc = encode(train_records, prep, config)
    val_enc = encode(val_records, prep, config) if val_records else None
    result = train(train_enc, prep.graph, config, len(prep.words), val_enc, prep.embedding, on_epoch)
    return ModelBundle(result.params, config, prep.words, prep.label_uis, prep.graph), result


def score_records(bundle: ModelBundle, records: Sequence[ArticleRecord]) -> np.ndarray:
    index = {ui: i for i, ui in enumerate(bundle.label_uis)}
    enc = encode_records(records, bundle.words, bundle.config, index)
    return predict(enc, bundle.params, bundle.graph, bundle.config)
