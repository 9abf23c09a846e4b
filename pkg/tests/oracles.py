"""Brute-force oracles written from the definitions alone.

Nothing here imports from ``meshidx``; tests compare the package against
these.
"""

import itertools
import math

import numpy as np


def harmonic(p, r):
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def oracle_example_based(gold, pred):
    precisions = []
    recalls = []
    for g, p in zip(gold, pred):
        g, p = set(g), set(p)
        inter = len(g.intersection(p))
        precisions.append(inter / len(p) if len(p) > 0 else 0.0)
        if len(g) > 0:
            recalls.append(inter / len(g))
    ebp = sum(precisions) / len(precisions) if precisions else 0.0
    ebr = sum(recalls) / len(recalls) if recalls else 0.0
    return ebp, ebr, harmonic(ebp, ebr)


def oracle_label_based(gold, pred, n_labels):
    tps, fps, fns = [], [], []
    for label in range(n_labels):
        tp = fp = fn = 0
        for g, p in zip(gold, pred):
            in_g, in_p = label in set(g), label in set(p)
            if in_g and in_p:
                tp += 1
            elif in_p:
                fp += 1
            elif in_g:
                fn += 1
        tps.append(tp)
        fps.append(fp)
        fns.append(fn)
    TP, FP, FN = sum(tps), sum(fps), sum(fns)
    mip = TP / (TP + FP) if TP + FP else 0.0
    mir = TP / (TP + FN) if TP + FN else 0.0
    ps, rs = [], []
    for tp, fp, fn in zip(tps, fps, fns):
        if tp == fp == fn == 0:
            continue
        ps.append(tp / (tp + fp) if tp + fp else 0.0)
        rs.append(tp / (tp + fn) if tp + fn else 0.0)
    map_ = sum(ps) / len(ps) if ps else 0.0
    mar = sum(rs) / len(rs) if rs else 0.0
    return {
        "MiP": mip, "MiR": mir, "MiF": harmonic(mip, mir),
        "MaP": map_, "MaR": mar, "MaF": harmonic(map_, mar),
    }


def oracle_ranked(gold, scores, ks):
    out = {}
    for k in ks:
        p_vals, r_vals = [], []
        for g, row in zip(gold, scores):
            # sort (score desc, ordinal asc) by full enumeration of pairs
            ranking = sorted(range(len(row)), key=lambda j: (-row[j], j))[:k]
            hits = len(set(ranking).intersection(set(g)))
            p_vals.append(hits / k)
            if len(g) > 0:
                r_vals.append(hits / len(set(g)))
        out[f"P@{k}"] = sum(p_vals) / len(p_vals) if p_vals else 0.0
        out[f"R@{k}"] = sum(r_vals) / len(r_vals) if r_vals else 0.0
    return out


def oracle_micro_f(gold, pred):
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        g, p = set(g), set(p)
        tp += len(g & p)
        fp += len(p - g)
        fn += len(g - p)
    mip = tp / (tp + fp) if tp + fp else 0.0
    mir = tp / (tp + fn) if tp + fn else 0.0
    return harmonic(mip, mir)


def oracle_midpoints(column):
    vals = sorted(set([0.0, 1.0] + list(column)))
    return [(a + b) / 2 for a, b in zip(vals, vals[1:])]


def exhaustive_best_micro_f(scores, gold):
    """Max micro-F over the full grid of per-label midpoint thresholds."""
    n_docs = len(scores)
    n_labels = len(scores[0])
    grids = [oracle_midpoints([scores[d][j] for d in range(n_docs)]) for j in range(n_labels)]
    best = 0.0
    for combo in itertools.product(*grids):
        pred = [{j for j in range(n_labels) if scores[d][j] >= combo[j]} for d in range(n_docs)]
        best = max(best, oracle_micro_f(gold, pred))
    return best


# --- model oracle: plain numpy loops, no autodiff library ---------------------


def oracle_conv(x, k, dilation):
    """Valid dilated convolution by nested loops; x (l, c_in), k (s, c_in, c_out)."""
    l, c_in = x.shape
    s, _, c_out = k.shape
    n = l - (s - 1) * dilation
    out = np.zeros((n, c_out))
    for t in range(n):
        for j in range(s):
            for a in range(c_in):
                for b in range(c_out):
                    out[t, b] += x[t + j * dilation, a] * k[j, a, b]
    return out


def oracle_channel(ids, length, p, channel, dilations):
    x = np.array([p["embedding"][i] if pos < length else np.zeros(p["embedding"].shape[1]) for pos, i in enumerate(ids)])
    for k, dil in enumerate(dilations):
        x = np.maximum(oracle_conv(x, p[f"conv.{channel}.{k}"], dil), 0.0)
    return x @ p[f"proj.{channel}"]


def oracle_labels(v, A, p, act=lambda z: np.maximum(z, 0.0)):
    h = v
    for name in ("gcn.0", "gcn.1"):
        h = act(A @ h @ p[name])
    return v + h


def oracle_attend(D, H, n_valid):
    L = H.shape[0]
    content = np.zeros((L, D.shape[1]))
    alpha = np.zeros((L, D.shape[0]))
    for i in range(L):
        logits = [float(H[i] @ D[t]) for t in range(n_valid)]
        m = max(logits)
        w = [math.exp(z - m) for z in logits]
        z = sum(w)
        for t in range(n_valid):
            alpha[i, t] = w[t] / z
            content[i] += alpha[i, t] * D[t]
    return content, alpha


def oracle_scores(docs, p, v, A, channels, dilations):
    """docs: list of {channel: (ids, length)}; returns (N, L) scores."""
    H = oracle_labels(v, A, p)
    out = []
    for doc in docs:
        total = np.zeros_like(H)
        for ch in channels:
            ids, length = doc[ch]
            D = oracle_channel(ids, length, p, ch, dilations)
            c, _ = oracle_attend(D, H, max(1, min(length, D.shape[0])))
            total += c
        z = (total * H).sum(axis=1) + p["bias"]
        out.append([1.0 / (1.0 + math.exp(-x)) for x in z])
    return np.array(out)
