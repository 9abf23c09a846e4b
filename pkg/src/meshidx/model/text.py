"""Tokenisation, word vocabulary and fixed-length channel encoding."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..corpus.records import ArticleRecord
from .config import CHANNEL_SECTIONS, CHANNELS, ModelConfig

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1
_TOKEN = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*")


def tokenize(text: Optional[str]) -> list[str]:
    return _TOKEN.findall(text.lower()) if text else []


def channel_text(record: ArticleRecord, channel: str) -> str:
    parts = [record.section(s) for s in CHANNEL_SECTIONS[channel]]
    return " ".join(p for p in parts if p)


class WordVocab:
    def __init__(self, tokens: Sequence[str]):
        if list(tokens[:2]) != [PAD, UNK]:
            raise ValueError("vocabulary must start with the pad and unknown tokens")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, WordVocab) and self.tokens == other.tokens

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    @classmethod
    def build(cls, texts: Iterable[str], min_freq: int = 2) -> "WordVocab":
        counts = Counter()
        for t in texts:
            counts.update(tokenize(t))
        kept = sorted((w for w, c in counts.items() if c >= min_freq), key=lambda w: (-counts[w], w))
        return cls([PAD, UNK] + kept)


def build_word_vocab(records: Iterable[ArticleRecord], config: ModelConfig) -> WordVocab:
    return WordVocab.build((channel_text(r, ch) for r in records for ch in CHANNELS), config.min_freq)


@dataclass
class EncodedCorpus:
    """Token ids per channel, padded to the channel length.

    ``tokens[ch]`` is ``(N, length)``; ``lengths[ch]`` counts real tokens.
    """

    pmids: list[str]
    tokens: dict[str, np.ndarray]
    lengths: dict[str, np.ndarray]
    labels: list[frozenset[int]]

    def __len__(self) -> int:
        return len(self.pmids)

    def subset(self, idx) -> "EncodedCorpus":
        idx = np.asarray(idx, dtype=np.int64)
        return EncodedCorpus(
            [self.pmids[i] for i in idx],
            {k: v[idx] for k, v in self.tokens.items()},
            {k: v[idx] for k, v in self.lengths.items()},
            [self.labels[i] for i in idx],
        )


def encode_ids(ids: Sequence[int], length: int) -> tuple[np.ndarray, int]:
    """Truncate or right-pad to ``length``; returns the array and the real count."""
    ids = list(ids)[:length]
    out = np.full(length, PAD_ID, dtype=np.int64)
    out[: len(ids)] = ids
    return out, len(ids)


def encode_records(
    records: Sequence[ArticleRecord],
    vocab: WordVocab,
    config: ModelConfig,
    label_index: Optional[Mapping[str, int]] = None,
    strict_labels: bool = False,
) -> EncodedCorpus:
    """Tokenise the active channels of each record.

    Gold labels come from each record's MeSH map via ``label_index``; UIs
    missing from the index are skipped unless ``strict_labels``.
    """
    tokens = {ch: np.zeros((len(records), config.channel_lengths[ch]), dtype=np.int64) for ch in config.channels}
    lengths = {ch: np.zeros(len(records), dtype=np.int64) for ch in config.channels}
    labels = []
    for i, r in enumerate(records):
        for ch in config.channels:
            ids = vocab.ids(tokenize(channel_text(r, ch)))
            if not ids:
                raise ValueError(f"document {r.pmid}: channel {ch} is empty")
            tokens[ch][i], lengths[ch][i] = encode_ids(ids, config.channel_lengths[ch])
        labs = set()
        if label_index is not None:
            for ui in r.mesh:
                j = label_index.get(ui)
                if j is None:
                    if strict_labels:
                        raise ValueError(f"document {r.pmid}: label {ui} not in vocabulary")
                    continue
                labs.add(j)
        labels.append(frozenset(labs))
    return EncodedCorpus([r.pmid for r in records], tokens, lengths, labels)
