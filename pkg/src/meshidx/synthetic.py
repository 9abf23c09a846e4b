"""Seeded synthetic descriptor trees and article records.

Each label owns a handful of pseudo-word keywords; its descriptor name is
made of the first two.  A document mentions the keywords of its gold
labels, sparsely in the title and abstract and more densely in the body
sections, on top of label-independent filler words.  Distractor keywords
from non-gold labels appear in every section at a lower rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus.records import ArticleRecord
from .mesh_graph import MeshDescriptor, MeshVocabulary

_ONSETS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
BODY = ("intro", "methods", "results", "discuss")


def pseudo_word(i: int, prefix: str = "") -> str:
    """Deterministic pronounceable token for a non-negative integer."""
    syll = [f"{o}{v}" for o in _ONSETS for v in _VOWELS]
    out = []
    n = i
    while True:
        out.append(syll[n % len(syll)])
        n //= len(syll)
        if n == 0:
            break
    return prefix + "".join(out)


@dataclass(frozen=True)
class SyntheticSpec:
    title_signal: float = 0.35  # chance each gold label is mentioned in title+abstract
    body_signal: float = 0.8  # chance per body section
    distractor_rate: float = 0.08  # chance per section per non-gold label draw
    n_distractors: int = 2
    filler_vocab: int = 400
    min_labels: int = 1
    max_labels: int = 3
    keywords_per_label: int = 4
    title_words: tuple[int, int] = (6, 10)
    abstract_words: tuple[int, int] = (25, 40)
    body_words: tuple[int, int] = (40, 70)


def label_keywords(j: int, spec: SyntheticSpec = SyntheticSpec()) -> list[str]:
    return [pseudo_word(j * spec.keywords_per_label + m, "q") for m in range(spec.keywords_per_label)]


def synthetic_vocabulary(n_labels: int, seed: int = 0, spec: SyntheticSpec = SyntheticSpec()) -> MeshVocabulary:
    """A random forest of descriptors; some descriptors sit in two places."""
    rng = np.random.default_rng([seed, 101])
    trees: list[list[str]] = []
    child_count: dict[str, int] = {}
    n_roots = max(1, n_labels // 10)
    for j in range(n_labels):
        if j < n_roots:
            node = f"{chr(ord('A') + j % 26)}{j // 26 + 1:02d}"
        else:
            parent = trees[int(rng.integers(0, j))][0]
            child_count[parent] = child_count.get(parent, 0) + 1
            node = f"{parent}.{child_count[parent]:03d}"
        trees.append([node])
    # a few descriptors get a second position under another parent
    for j in range(n_roots, n_labels):
        if rng.random() < 0.1:
            parent = trees[int(rng.integers(0, n_roots))][0]
            child_count[parent] = child_count.get(parent, 0) + 1
            trees[j].append(f"{parent}.{child_count[parent]:03d}")
    descs = []
    for j in range(n_labels):
        kw = label_keywords(j, spec)
        descs.append(MeshDescriptor(f"D9{j:05d}", f"{kw[0].title()} {kw[1]}", tuple(trees[j])))
    return MeshVocabulary.from_descriptors(descs)


def _words(rng, n_range, filler: list[str]) -> list[str]:
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    return [filler[int(i)] for i in rng.integers(0, len(filler), size=n)]


def _insert(rng, words: list[str], extra: list[str]) -> None:
    for w in extra:
        words.insert(int(rng.integers(0, len(words) + 1)), w)


def synthetic_records(
    n_docs: int,
    vocab: MeshVocabulary,
    seed: int = 0,
    spec: SyntheticSpec = SyntheticSpec(),
    first_pmid: int = 40_000_000,
    years: tuple[int, ...] = (2016, 2017, 2018),
) -> list[ArticleRecord]:
    rng = np.random.default_rng([seed, 202])
    n_labels = len(vocab)
    filler = [pseudo_word(i, "w") for i in range(spec.filler_vocab)]
    popularity = 1.0 / np.sqrt(np.arange(1, n_labels + 1))
    popularity = popularity[rng.permutation(n_labels)]
    popularity /= popularity.sum()
    keywords = [label_keywords(j, spec) for j in range(n_labels)]
    hi = min(spec.max_labels, n_labels)

    def mentions(gold, rate):
        out = [keywords[j][int(rng.integers(0, spec.keywords_per_label))] for j in gold if rng.random() < rate]
        for _ in range(spec.n_distractors):
            if rng.random() < spec.distractor_rate:
                j = int(rng.integers(0, n_labels))
                if j not in gold:
                    out.append(keywords[j][int(rng.integers(0, spec.keywords_per_label))])
        return out

    records = []
    for i in range(n_docs):
        k = int(rng.integers(min(spec.min_labels, hi), hi + 1))
        gold = sorted(int(j) for j in rng.choice(n_labels, size=k, replace=False, p=popularity))
        title = _words(rng, spec.title_words, filler)
        abstract = _words(rng, spec.abstract_words, filler)
        _insert(rng, abstract, mentions(gold, spec.title_signal))
        body = {}
        for name in BODY:
            w = _words(rng, spec.body_words, filler)
            _insert(rng, w, mentions(gold, spec.body_signal))
            body[name] = " ".join(w)
        records.append(
            ArticleRecord(
                pmid=str(first_pmid + i),
                title=" ".join(title).capitalize(),
                abstract=" ".join(abstract),
                journal="Synthetic Journal",
                year=years[i % len(years)],
                authors=(f"{pseudo_word(i, 'a').title()},{pseudo_word(i + 7, 'o').title()}",),
                mesh={vocab.descriptors[j].ui: vocab.descriptors[j].name for j in gold},
                **body,
            )
        )
    return records


def synthetic_corpus(
    n_docs: int,
    n_labels: int,
    seed: int = 0,
    spec: Optional[SyntheticSpec] = None,
) -> tuple[MeshVocabulary, list[ArticleRecord]]:
    spec = spec or SyntheticSpec()
    vocab = synthetic_vocabulary(n_labels, seed, spec)
    return vocab, synthetic_records(n_docs, vocab, seed, spec)
