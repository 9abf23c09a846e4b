"""Text formats for scores, predictions, thresholds and run manifests.

Score file (JSON lines)::

    {"labels": ["D000001", ...]}                  first line, label order
    {"pmid": "123", "scores": [0.12, ...]}        one line per document

Prediction file (JSON lines): ``{"pmid": ..., "top_k": [[ui, score], ...]}``
from ``predict``, or ``{"pmid": ..., "labels": [ui, ...]}`` for a label
set.  Threshold file (JSON): ``{"labels": [...], "thresholds": [...],
"micro_f": ..., "sweeps": ...}``.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


class FormatError(ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _lines(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


# --- scores ---------------------------------------------------------------


def write_scores(path, pmids: Sequence[str], labels: Sequence[str], scores: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump({"labels": list(labels)}) + "\n")
        for pmid, row in zip(pmids, scores):
            fh.write(_dump({"pmid": pmid, "scores": [float(x) for x in row]}) + "\n")


def read_scores(path) -> tuple[list[str], list[str], np.ndarray]:
    """Return ``(pmids, label_uis, scores)``."""
    it = iter(_lines(path))
    try:
        _, head = next(it)
    except StopIteration:
        raise FormatError(f"{path}: empty score file") from None
    if "labels" not in head:
        raise FormatError(f"{path}:1: first line must list the labels")
    labels = list(head["labels"])
    pmids, rows = [], []
    for lineno, obj in it:
        row = obj.get("scores")
        if "pmid" not in obj or not isinstance(row, list):
            raise FormatError(f"{path}:{lineno}: expected pmid and scores")
        if len(row) != len(labels):
            raise FormatError(f"{path}:{lineno}: {len(row)} scores for {len(labels)} labels")
        pmids.append(str(obj["pmid"]))
        rows.append(row)
    arr = np.array(rows, dtype=float).reshape(len(rows), len(labels))
    if np.any((arr < 0) | (arr > 1)) or not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: scores must lie in [0, 1]")
    return pmids, labels, arr


def write_top_k(path, pmids: Sequence[str], labels: Sequence[str], scores: np.ndarray, k: int) -> None:
    from .evaluation import top_k

    with open(path, "w", encoding="utf-8") as fh:
        for pmid, row in zip(pmids, scores):
            best = top_k(row, k)
            fh.write(_dump({"pmid": pmid, "top_k": [[labels[j], float(row[j])] for j in best]}) + "\n")


def read_label_sets(path) -> dict[str, list[str]]:
    """Map PMID to predicted UIs from a ``labels`` or ``top_k`` prediction file."""
    out = {}
    for lineno, obj in _lines(path):
        if "pmid" not in obj:
            raise FormatError(f"{path}:{lineno}: missing pmid")
        if "labels" in obj:
            uis = obj["labels"]
        elif "top_k" in obj:
            uis = [pair[0] for pair in obj["top_k"]]
        else:
            raise FormatError(f"{path}:{lineno}: expected labels or top_k")
        out[str(obj["pmid"])] = [str(u) for u in uis]
    return out


# --- thresholds -----------------------------------------------------------


def write_thresholds(path, labels: Sequence[str], thresholds: np.ndarray, micro_f: float, sweeps: int) -> None:
    doc = {"labels": list(labels), "thresholds": [float(t) for t in thresholds], "micro_f": micro_f, "sweeps": sweeps}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_thresholds(path) -> tuple[list[str], np.ndarray]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        labels, tau = list(doc["labels"]), np.array(doc["thresholds"], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: not a threshold file ({exc})") from None
    if len(labels) != len(tau):
        raise FormatError(f"{path}: {len(tau)} thresholds for {len(labels)} labels")
    return labels, tau


# --- manifests ------------------------------------------------------------


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def input_digests(paths: Iterable) -> dict[str, str]:
    """SHA-256 of every input file; directories contribute each file inside."""
    out = {}
    for p in paths:
        if p is None:
            continue
        p = Path(p)
        if p.is_dir():
            for f in sorted(q for q in p.rglob("*") if q.is_file()):
                out[str(f)] = file_digest(f)
        else:
            out[str(p)] = file_digest(p)
    return out


def config_hash(config: Mapping) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode("utf-8")).hexdigest()


def manifest(
    command: str,
    config: Mapping,
    seed: Optional[int],
    inputs: Mapping[str, str],
    outputs: Mapping[str, str],
    extra: Optional[Mapping] = None,
) -> str:
    from . import __version__

    doc = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config_sha256": config_hash(config),
        "config": dict(config),
        "inputs": dict(inputs),
        "outputs": dict(outputs),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n"


class OutputSet:
    """Declared outputs written to temporary names and renamed on success.

    Used as a context manager: on an exception every temporary (and any
    file already moved into place) is removed, so a failed command leaves
    no partial outputs behind.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self._pending: dict[Path, Path] = {}
        self._done: list[Path] = []

    def path(self, name) -> Path:
        final = self.directory / name
        tmp = final.with_name(f".{final.name}.partial-{os.getpid()}")
        self._pending[final] = tmp
        return tmp

    @property
    def finals(self) -> list[Path]:
        return list(self._pending)

    def commit(self) -> None:
        for final, tmp in self._pending.items():
            if not tmp.exists():
                raise FileNotFoundError(f"declared output {final} was not written")
        for final, tmp in self._pending.items():
            os.replace(tmp, final)
            self._done.append(final)

    def discard(self) -> None:
        for final, tmp in self._pending.items():
            tmp.unlink(missing_ok=True)
        for final in self._done:
            final.unlink(missing_ok=True)

    def __enter__(self):
        self.directory.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.discard()
        return False
