"""Filtering, joining, statistics and splitting of the joined corpus."""

from __future__ import annotations

import json
import logging
import math
import os
import pickle
import sqlite3
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .parsers import iter_bioc_file, iter_medline_file
from .records import SECTIONS, ArticleRecord, CitationMetadata, FullTextSections, emit_record

log = logging.getLogger(__name__)

COMPLETE_SECTIONS = ("title", "abstract", "intro", "methods", "results", "discuss")


def filter_citation(c: CitationMetadata) -> bool:
    """Keep English, human-indexed citations that carry a publication year."""
    return c.language == "eng" and c.indexing_mode == "human" and c.year is not None


def _pmid_key(pmid: str):
    return (0, int(pmid), "") if pmid.isdigit() else (1, 0, pmid)


def join_records(
    sections: Mapping[str, FullTextSections],
    citations: Mapping[str, CitationMetadata],
) -> list[ArticleRecord]:
    shared = sorted(set(sections).intersection(citations), key=_pmid_key)
    return [ArticleRecord.combine(sections[p], citations[p]) for p in shared]


@dataclass
class SectionStat:
    articles: int = 0
    average_length: float = 0.0


def corpus_stats(records: Iterable[ArticleRecord]) -> dict[str, SectionStat]:
    """Per-section document count and mean whitespace-token length."""
    counts = {s: 0 for s in SECTIONS}
    tokens = {s: 0 for s in SECTIONS}
    for r in records:
        for s in SECTIONS:
            text = r.section(s)
            if text is not None:
                counts[s] += 1
                tokens[s] += len(text.split())
    return {s: SectionStat(counts[s], tokens[s] / counts[s] if counts[s] else 0.0) for s in SECTIONS}


def stats_to_json(stats: Mapping[str, SectionStat]) -> dict:
    return {
        s.upper(): {"number_of_articles": st.articles, "average_length": st.average_length}
        for s, st in stats.items()
    }


def select_complete(records: Iterable[ArticleRecord]) -> list[ArticleRecord]:
    return [r for r in records if all(r.section(s) is not None for s in COMPLETE_SECTIONS)]


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ValueError(f"split ratios must be three non-negative numbers, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {sum(self.ratios)}")


def largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    """Integer counts summing to ``n``, as close to ``n * ratio`` as possible.

    Leftover units go to the largest fractional parts, earlier parts first
    on ties.
    """
    exact = [n * r for r in ratios]
    counts = [math.floor(x + 1e-9) for x in exact]
    rest = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def stratified_split(
    records: Sequence[ArticleRecord], spec: SplitSpec
) -> tuple[list[ArticleRecord], list[ArticleRecord], list[ArticleRecord]]:
    """Split within each publication year by ``spec.ratios``.

    The result depends only on the set of records and the seed, not on
    input order.
    """
    by_year: dict[Optional[int], list[ArticleRecord]] = {}
    for r in records:
        by_year.setdefault(r.year, []).append(r)
    parts: tuple[list, list, list] = ([], [], [])
    for year in sorted(by_year, key=lambda y: (y is None, y or 0)):
        group = sorted(by_year[year], key=lambda r: _pmid_key(r.pmid))
        rng = np.random.default_rng([spec.seed, -1 if year is None else year])
        perm = rng.permutation(len(group))
        n_train, n_val, _ = largest_remainder(len(group), spec.ratios)
        for rank, idx in enumerate(perm):
            which = 0 if rank < n_train else 1 if rank < n_train + n_val else 2
            parts[which].append(group[idx])
    return tuple(sorted(p, key=lambda r: _pmid_key(r.pmid)) for p in parts)  # type: ignore[return-value]


class KeyIndex:
    """String-keyed store that spills from a dict into SQLite past a size limit."""

    def __init__(self, memory_limit: int = 100_000, directory: Optional[str] = None):
        self.memory_limit = memory_limit
        self._mem: dict[str, object] = {}
        self._db: Optional[sqlite3.Connection] = None
        self._dir = directory
        self._path: Optional[str] = None

    @property
    def on_disk(self) -> bool:
        return self._db is not None

    def _spill(self) -> None:
        fd, self._path = tempfile.mkstemp(suffix=".sqlite", dir=self._dir)
        os.close(fd)
        self._db = sqlite3.connect(self._path)
        self._db.execute("CREATE TABLE kv (k TEXT PRIMARY KEY, v BLOB)")
        self._db.executemany("INSERT OR REPLACE INTO kv VALUES (?, ?)", ((k, pickle.dumps(v)) for k, v in self._mem.items()))
        self._mem.clear()

    def put(self, key: str, value) -> None:
        if self._db is not None:
            self._db.execute("INSERT OR REPLACE INTO kv VALUES (?, ?)", (key, pickle.dumps(value)))
            return
        self._mem[key] = value
        if len(self._mem) > self.memory_limit:
            self._spill()

    def get(self, key: str):
        if self._db is None:
            return self._mem[key]
        row = self._db.execute("SELECT v FROM kv WHERE k = ?", (key,)).fetchone()
        if row is None:
            raise KeyError(key)
        return pickle.loads(row[0])

    def keys(self) -> set[str]:
        if self._db is None:
            return set(self._mem)
        return {k for (k,) in self._db.execute("SELECT k FROM kv")}

    def __len__(self) -> int:
        if self._db is None:
            return len(self._mem)
        return self._db.execute("SELECT COUNT(*) FROM kv").fetchone()[0]

    def close(self) -> None:
        if self._db is not None:
            self._db.close()
            self._db = None
            if self._path and os.path.exists(self._path):
                os.remove(self._path)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class FileParseError(Exception):
    def __init__(self, path, cause: Exception):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{path}: {cause}")

    def __reduce__(self):
        return (FileParseError, (self.path, self.cause))


def _parse_bioc_path(path: str) -> list[FullTextSections]:
    try:
        return list(iter_bioc_file(path))
    except Exception as exc:  # reported with the file name by the caller
        raise FileParseError(path, exc) from exc


def _parse_medline_path(path: str) -> list[CitationMetadata]:
    try:
        return list(iter_medline_file(path))
    except Exception as exc:
        raise FileParseError(path, exc) from exc


def _map_files(fn: Callable, paths: Sequence[str], workers: int) -> Iterator:
    if workers <= 1 or len(paths) <= 1:
        for p in paths:
            yield fn(p)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves input order, so the merge is deterministic
        yield from pool.map(fn, paths)


def list_xml_files(directory) -> list[str]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(str(p) for p in d.iterdir() if p.is_file() and (p.suffix == ".xml" or p.name.endswith(".xml.gz")))


@dataclass
class BuildCounts:
    bioc_files: int = 0
    medline_files: int = 0
    articles_parsed: int = 0
    citations_parsed: int = 0
    citations_kept: int = 0
    rejected_language: int = 0
    rejected_mode: int = 0
    rejected_no_year: int = 0
    joined: int = 0
    index_on_disk: bool = False
    extra: dict = field(default_factory=dict)


def build_corpus(
    bioc_dir,
    medline_dir,
    out_path,
    workers: int = 1,
    memory_limit: int = 100_000,
) -> BuildCounts:
    """Parse both corpora, filter, join on PMID and write one record per line."""
    counts = BuildCounts()
    bioc_files = list_xml_files(bioc_dir)
    medline_files = list_xml_files(medline_dir)
    counts.bioc_files, counts.medline_files = len(bioc_files), len(medline_files)
    with KeyIndex(memory_limit) as texts, KeyIndex(memory_limit) as cits:
        for batch in _map_files(_parse_bioc_path, bioc_files, workers):
            for sec in batch:
                counts.articles_parsed += 1
                texts.put(sec.pmid, sec)
        for batch in _map_files(_parse_medline_path, medline_files, workers):
            for c in batch:
                counts.citations_parsed += 1
                if c.language != "eng":
                    counts.rejected_language += 1
                elif c.indexing_mode != "human":
                    counts.rejected_mode += 1
                elif c.year is None:
                    counts.rejected_no_year += 1
                if filter_citation(c):
                    counts.citations_kept += 1
                    cits.put(c.pmid, c)
        counts.index_on_disk = texts.on_disk or cits.on_disk
        shared = sorted(texts.keys() & cits.keys(), key=_pmid_key)
        with open(out_path, "w", encoding="utf-8") as fh:
            for pmid in shared:
                fh.write(emit_record(ArticleRecord.combine(texts.get(pmid), cits.get(pmid))))
                fh.write("\n")
                counts.joined += 1
    log.info("joined %d records from %d articles and %d kept citations",
             counts.joined, counts.articles_parsed, counts.citations_kept)
    return counts


def write_split_manifests(parts, out_dir) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, recs in zip(("train", "validation", "test"), parts):
        p = out / f"{name}.txt"
        p.write_text("".join(f"{r.pmid}\n" for r in recs), encoding="utf-8")
        paths[name] = str(p)
    return paths


def read_pmid_list(path) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def dumps_stats(stats: Mapping[str, SectionStat]) -> str:
    return json.dumps(stats_to_json(stats), indent=2)
