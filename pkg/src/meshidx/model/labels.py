"""Initial word-embedding table and the label matrix derived from it."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..mesh_graph import MeshVocabulary, WordVectors, init_label_embeddings
from .config import ModelConfig
from .text import WordVocab


def initial_embedding(
    config: ModelConfig,
    words: WordVocab,
    vectors: Optional[WordVectors] = None,
) -> np.ndarray:
    """Uniform(-init_scale, init_scale) rows, overwritten by external vectors where present."""
    rng = np.random.default_rng([config.seed, 0])
    emb = rng.uniform(-config.init_scale, config.init_scale, size=(len(words), config.d))
    if vectors is not None:
        if vectors.dim != config.d:
            raise ValueError(f"word vectors have dimension {vectors.dim}, model expects {config.d}")
        for i, tok in enumerate(words.tokens):
            if tok in vectors:
                emb[i] = vectors.get(tok)
    emb[0] = 0.0
    return emb


def label_matrix(
    mesh: MeshVocabulary,
    words: WordVocab,
    embedding: np.ndarray,
    config: ModelConfig,
) -> np.ndarray:
    """Average of the name-token embeddings for each descriptor.

    A descriptor none of whose name tokens are in the word vocabulary
    would get an all-zero row and could never score above its bias, so it
    gets a seeded uniform row instead.
    """
    table = WordVectors({t: embedding[i] for i, t in enumerate(words.tokens[2:], start=2)}, embedding.shape[1])
    v = init_label_embeddings(mesh, table)
    dead = ~v.any(axis=1)
    if dead.any():
        rng = np.random.default_rng([config.seed, 3])
        v[dead] = rng.uniform(-config.init_scale, config.init_scale, size=(int(dead.sum()), v.shape[1]))
    return v
