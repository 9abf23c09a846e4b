"""MeSH descriptor vocabulary, hierarchy adjacency and initial label vectors.

The descriptor file is a TSV with one descriptor per line::

    D000200<TAB>Action Potentials<TAB>G07.265.500

The third column holds ``;``-separated tree numbers and may be empty for a
rootless descriptor.  Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

_UI_RE = re.compile(r"^D\d+$")
_NAME_SPLIT = re.compile(r"[\s,]+")


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class MeshDescriptor:
    ui: str
    name: str
    tree_numbers: tuple[str, ...] = ()


@dataclass(frozen=True)
class MeshVocabulary:
    descriptors: tuple[MeshDescriptor, ...]
    index: Mapping[str, int] = field(repr=False)

    @classmethod
    def from_descriptors(cls, descriptors: Iterable[MeshDescriptor]) -> "MeshVocabulary":
        descs = tuple(descriptors)
        index: dict[str, int] = {}
        for i, d in enumerate(descs):
            if d.ui in index:
                raise VocabularyError(f"duplicate descriptor UI {d.ui}")
            index[d.ui] = i
        return cls(descs, index)

    def __len__(self) -> int:
        return len(self.descriptors)

    @property
    def uis(self) -> list[str]:
        return [d.ui for d in self.descriptors]

    def ordinals(self, uis: Iterable[str], strict: bool = True) -> list[int]:
        out = []
        for ui in uis:
            i = self.index.get(ui)
            if i is None:
                if strict:
                    raise VocabularyError(f"descriptor {ui} not in vocabulary")
                continue
            out.append(i)
        return sorted(set(out))


def load_vocabulary(path) -> MeshVocabulary:
    descriptors = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise VocabularyError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(parts)}")
            ui, name = parts[0].strip(), parts[1].strip()
            if not _UI_RE.match(ui):
                raise VocabularyError(f"{path}:{lineno}: malformed descriptor UI {ui!r}")
            if not name:
                raise VocabularyError(f"{path}:{lineno}: empty descriptor name")
            if ui in seen:
                raise VocabularyError(f"{path}:{lineno}: duplicate descriptor UI {ui} (first at line {seen[ui]})")
            seen[ui] = lineno
            trees = tuple(t.strip() for t in parts[2].split(";") if t.strip()) if len(parts) == 3 else ()
            descriptors.append(MeshDescriptor(ui, name, trees))
    return MeshVocabulary.from_descriptors(descriptors)


def write_vocabulary(vocab: MeshVocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in vocab.descriptors:
            fh.write(f"{d.ui}\t{d.name}\t{';'.join(d.tree_numbers)}\n")


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Symmetric 0/1 label graph with self loops, stored as CSR.

    ``multi_position_edges`` counts undirected parent/child edges that were
    contributed by a descriptor's second or later tree number, i.e. edges
    that would vanish if only the first position were used.
    """

    matrix: sp.csr_matrix
    multi_position_edges: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def normalized(self) -> sp.csr_matrix:
        """``D^-1/2 A D^-1/2`` with D the row sums."""
        deg = np.asarray(self.matrix.sum(axis=1)).ravel()
        inv = sp.diags(1.0 / np.sqrt(deg))
        return (inv @ self.matrix @ inv).tocsr()

    def to_coo_text(self) -> str:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [f"{coo.row[k]} {coo.col[k]} {coo.data[k]:g}" for k in order]
        return "\n".join(lines) + ("\n" if lines else "")


def _parent_tree(tree: str) -> Optional[str]:
    head, sep, _ = tree.rpartition(".")
    return head if sep else None


def build_adjacency(vocab: MeshVocabulary) -> AdjacencyMatrix:
    n = len(vocab)
    owner: dict[str, list[int]] = {}
    for i, d in enumerate(vocab.descriptors):
        for t in d.tree_numbers:
            owner.setdefault(t, []).append(i)
    edges: set[tuple[int, int]] = set()
    first_only: set[tuple[int, int]] = set()
    for i, d in enumerate(vocab.descriptors):
        for pos, t in enumerate(d.tree_numbers):
            parent = _parent_tree(t)
            if parent is None:
                continue
            for j in owner.get(parent, ()):
                if i == j:
                    continue
                e = (min(i, j), max(i, j))
                edges.add(e)
                if pos == 0 and vocab.descriptors[j].tree_numbers.index(parent) == 0:
                    first_only.add(e)
    rows = list(range(n))
    cols = list(range(n))
    for i, j in sorted(edges):
        rows += [i, j]
        cols += [j, i]
    mat = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return AdjacencyMatrix(mat, len(edges - first_only))


def descriptor_tokens(name: str) -> list[str]:
    return [t for t in _NAME_SPLIT.split(name.lower()) if t]


class WordVectors:
    """Token to vector lookup; a missing token maps to the zero vector."""

    def __init__(self, vectors: Mapping[str, np.ndarray], dim: int):
        self.vectors = dict(vectors)
        self.dim = dim

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> np.ndarray:
        v = self.vectors.get(token)
        return np.zeros(self.dim) if v is None else v


def load_word_vectors(path) -> WordVectors:
    """Read ``token v1 ... vd`` lines; a leading word2vec ``count dim`` line is skipped."""
    vectors: dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise VocabularyError(f"{path}:{lineno}: {exc}") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise VocabularyError(f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
            vectors[parts[0]] = vec
    if dim is None:
        raise VocabularyError(f"{path}: no vectors")
    return WordVectors(vectors, dim)


def init_label_embeddings(vocab: MeshVocabulary, emb: WordVectors) -> np.ndarray:
    """Average the word vectors of each descriptor name, one row per label.

    Out-of-vocabulary tokens add a zero vector but still count towards the
    divisor.
    """
    out = np.zeros((len(vocab), emb.dim))
    for i, d in enumerate(vocab.descriptors):
        toks = descriptor_tokens(d.name)
        if not toks:
            raise VocabularyError(f"descriptor {d.ui} has an empty name")
        out[i] = sum((emb.get(t) for t in toks), np.zeros(emb.dim)) / len(toks)
    return out
