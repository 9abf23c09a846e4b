"""Multi-label evaluation: example-based, label-based and ranking measures,
plus per-label decision thresholds tuned for micro-F.

Documents are indexed 0..N-1, labels by ordinal 0..L-1.  Gold and predicted
label sets are plain iterables of ordinals; scores are an ``(N, L)`` array.

Degenerate cases:

* a document with an empty predicted set contributes precision 0;
* a document with an empty gold set is left out of every recall average
  (example-based recall and R@k) but still counts for precision;
* labels with TP = FP = FN = 0 are left out of the macro averages, and the
  number left out is reported;
* any F with P + R = 0 is 0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_KS = (1, 3, 5, 10, 15)


def _f(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def _as_sets(sets: Iterable[Iterable[int]]) -> list[frozenset[int]]:
    return [frozenset(int(x) for x in s) for s in sets]


def example_based(gold, pred) -> tuple[float, float, float]:
    """Return (EBP, EBR, EBF)."""
    gold, pred = _as_sets(gold), _as_sets(pred)
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sets but {len(pred)} predicted sets")
    if not gold:
        return 0.0, 0.0, 0.0
    p_sum = 0.0
    r_sum = 0.0
    r_docs = 0
    for g, p in zip(gold, pred):
        hit = len(g & p)
        if p:
            p_sum += hit / len(p)
        if g:
            r_sum += hit / len(g)
            r_docs += 1
    ebp = p_sum / len(gold)
    ebr = r_sum / r_docs if r_docs else 0.0
    return ebp, ebr, _f(ebp, ebr)


@dataclass
class LabelCounts:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray


def label_counts(gold, pred, n_labels: int) -> LabelCounts:
    gold, pred = _as_sets(gold), _as_sets(pred)
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sets but {len(pred)} predicted sets")
    tp = np.zeros(n_labels, dtype=np.int64)
    fp = np.zeros(n_labels, dtype=np.int64)
    fn = np.zeros(n_labels, dtype=np.int64)
    for g, p in zip(gold, pred):
        for j in g | p:
            if not 0 <= j < n_labels:
                raise ValueError(f"label ordinal {j} outside [0, {n_labels})")
        for j in g & p:
            tp[j] += 1
        for j in p - g:
            fp[j] += 1
        for j in g - p:
            fn[j] += 1
    return LabelCounts(tp, fp, fn)


def label_based(gold, pred, n_labels: int) -> dict[str, float]:
    """Micro and macro precision/recall/F plus the count of labels left out of macro."""
    c = label_counts(gold, pred, n_labels)
    tp, fp, fn = int(c.tp.sum()), int(c.fp.sum()), int(c.fn.sum())
    mip = tp / (tp + fp) if tp + fp else 0.0
    mir = tp / (tp + fn) if tp + fn else 0.0
    active = (c.tp + c.fp + c.fn) > 0
    n_active = int(active.sum())
    if n_active:
        tpa, fpa, fna = c.tp[active], c.fp[active], c.fn[active]
        with np.errstate(invalid="ignore", divide="ignore"):
            per_p = np.where(tpa + fpa > 0, tpa / np.maximum(tpa + fpa, 1), 0.0)
            per_r = np.where(tpa + fna > 0, tpa / np.maximum(tpa + fna, 1), 0.0)
        map_ = float(per_p.sum() / n_active)
        mar = float(per_r.sum() / n_active)
    else:
        map_ = mar = 0.0
    return {
        "MiP": mip,
        "MiR": mir,
        "MiF": _f(mip, mir),
        "MaP": map_,
        "MaR": mar,
        "MaF": _f(map_, mar),
        "macro_excluded_labels": n_labels - n_active,
    }


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores; ties go to the smaller ordinal."""
    order = np.lexsort((np.arange(scores.shape[-1]), -scores))
    return order[:k]


def ranked(gold, scores, ks: Sequence[int] = DEFAULT_KS) -> dict[str, float]:
    """P@k and R@k from raw scores, averaged over documents."""
    gold = _as_sets(gold)
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != len(gold):
        raise ValueError(f"scores shape {scores.shape} does not match {len(gold)} documents")
    out: dict[str, float] = {}
    kmax = max(ks) if ks else 0
    rankings = [top_k(row, kmax) for row in scores]
    n_rec = sum(1 for g in gold if g)
    for k in ks:
        p_sum = 0.0
        r_sum = 0.0
        for g, order in zip(gold, rankings):
            hits = sum(1 for j in order[:k] if int(j) in g)
            p_sum += hits / k
            if g:
                r_sum += hits / len(g)
        out[f"P@{k}"] = p_sum / len(gold) if gold else 0.0
        out[f"R@{k}"] = r_sum / n_rec if n_rec else 0.0
    return out


def apply_thresholds(scores, thresholds) -> list[frozenset[int]]:
    """Label i is predicted iff its score is >= its threshold."""
    scores = np.asarray(scores, dtype=float)
    tau = np.broadcast_to(np.asarray(thresholds, dtype=float), scores.shape[-1:])
    if scores.ndim != 2:
        raise ValueError(f"scores must be 2-D, got shape {scores.shape}")
    hit = scores >= tau
    return [frozenset(np.flatnonzero(row).tolist()) for row in hit]


def gold_matrix(gold, n_docs: int, n_labels: int) -> np.ndarray:
    y = np.zeros((n_docs, n_labels), dtype=bool)
    for i, g in enumerate(gold):
        for j in g:
            y[i, int(j)] = True
    return y


def candidate_thresholds(column: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct values of ``{0} ∪ column ∪ {1}``.

    Every achievable cut of the column is represented exactly once: the first
    midpoint selects everything, the last selects nothing.
    """
    vals = np.unique(np.concatenate(([0.0], np.asarray(column, dtype=float), [1.0])))
    return (vals[:-1] + vals[1:]) / 2.0


def micro_f_from_counts(tp: int, n_pred: int, n_gold: int) -> float:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    return _f(p, r)


@dataclass
class TuningResult:
    thresholds: np.ndarray
    micro_f: float
    sweeps: int


def tune_thresholds(
    scores,
    gold,
    max_sweeps: int = 5,
    start: float = 0.5,
) -> TuningResult:
    """Per-label thresholds maximising corpus micro-F by coordinate ascent.

    Every threshold starts at ``start``.  A sweep visits labels in ordinal
    order; for each, all candidate cuts are scored with the other labels held
    fixed and the best is taken (ties go to the larger threshold).  The
    current threshold is only replaced when the best candidate is at least as
    good, so micro-F never drops below its value at the start.  Sweeps stop
    after one that changes no label's predictions, or after ``max_sweeps``.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[0] < 1:
        raise ValueError("need a non-empty (N, L) score matrix")
    n_docs, n_labels = s.shape
    y = gold_matrix(gold, n_docs, n_labels)
    n_gold = int(y.sum())
    tau = np.full(n_labels, float(start))

    pred = s >= tau
    tp_l = (pred & y).sum(axis=0).astype(np.int64)
    np_l = pred.sum(axis=0).astype(np.int64)
    tp_all, np_all = int(tp_l.sum()), int(np_l.sum())

    # per label: candidate cuts with their TP and prediction counts
    cands = []
    for i in range(n_labels):
        c = candidate_thresholds(s[:, i])
        order = np.argsort(-s[:, i], kind="stable")
        sorted_scores = s[order, i]
        cum_tp = np.concatenate(([0], np.cumsum(y[order, i])))
        # number of docs with score >= c
        n_sel = np.searchsorted(-sorted_scores, -c, side="right")
        cands.append((c, cum_tp[n_sel], n_sel))

    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for i in range(n_labels):
            c, tp_c, n_c = cands[i]
            base_tp = tp_all - tp_l[i]
            base_np = np_all - np_l[i]
            f_c = np.array([micro_f_from_counts(base_tp + t, base_np + n, n_gold) for t, n in zip(tp_c, n_c)])
            best = f_c.max()
            k = int(np.flatnonzero(f_c == best)[-1])
            cur = micro_f_from_counts(tp_all, np_all, n_gold)
            if best >= cur:
                changed = changed or best > cur
                tau[i] = c[k]
                tp_all = base_tp + int(tp_c[k])
                np_all = base_np + int(n_c[k])
                tp_l[i], np_l[i] = tp_c[k], n_c[k]
        if not changed:
            break
    return TuningResult(tau, micro_f_from_counts(tp_all, np_all, n_gold), sweeps)


@dataclass
class MetricsReport:
    EBF: float
    EBP: float
    EBR: float
    MiF: float
    MiP: float
    MiR: float
    MaF: float
    MaP: float
    MaR: float
    ranking: dict[str, float] = field(default_factory=dict)
    macro_excluded_labels: int = 0
    n_documents: int = 0

    def to_dict(self) -> dict:
        """Nested like the bipartition / ranking tables."""
        d = asdict(self)
        return {
            "bipartition": {
                "example_based": {k: d[k] for k in ("EBF", "EBP", "EBR")},
                "micro_averaged": {k: d[k] for k in ("MiF", "MiP", "MiR")},
                "macro_averaged": {k: d[k] for k in ("MaF", "MaP", "MaR")},
            },
            "ranking": dict(self.ranking),
            "macro_excluded_labels": self.macro_excluded_labels,
            "n_documents": self.n_documents,
        }


def evaluate(gold, pred, n_labels: int, scores=None, ks: Sequence[int] = DEFAULT_KS) -> MetricsReport:
    gold = _as_sets(gold)
    pred = _as_sets(pred)
    ebp, ebr, ebf = example_based(gold, pred)
    lb = label_based(gold, pred, n_labels)
    rk = ranked(gold, scores, ks) if scores is not None else {}
    return MetricsReport(
        EBF=ebf,
        EBP=ebp,
        EBR=ebr,
        MiF=lb["MiF"],
        MiP=lb["MiP"],
        MiR=lb["MiR"],
        MaF=lb["MaF"],
        MaP=lb["MaP"],
        MaR=lb["MaR"],
        ranking=rk,
        macro_excluded_labels=int(lb["macro_excluded_labels"]),
        n_documents=len(gold),
    )
