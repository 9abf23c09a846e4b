"""``meshidx`` command line: corpus building, training, prediction and scoring.

Every command writes its outputs into the output directory (``--output-dir``,
else ``$MESHIDX_OUTPUT_DIR``, else the current directory) together with a
``<command>.manifest.json`` recording the resolved settings, their hash,
the seed and SHA-256 digests of every input and output.  Outputs are
written under temporary names and only moved into place once all of them
exist, so a failing command leaves nothing half-written.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import artifacts
from .artifacts import FormatError, OutputSet
from .corpus import (
    SchemaError,
    SplitSpec,
    build_corpus,
    corpus_stats,
    read_pmid_list,
    read_records,
    select_complete,
    stats_to_json,
    stratified_split,
)
from .corpus.build import FileParseError
from .evaluation import DEFAULT_KS, apply_thresholds, evaluate, tune_thresholds
from .mesh_graph import VocabularyError, load_vocabulary, load_word_vectors
from .model import ModelConfig, VocabularyMismatch, load_bundle, save_bundle
from .model.config import coerce_model_fields, load_flat_config
from .model.pipeline import fit, score_records
from .numeric import CheckpointError

log = logging.getLogger("meshidx")

OUTPUT_ENV = "MESHIDX_OUTPUT_DIR"
MODEL_FIELDS = {f.name for f in dataclasses.fields(ModelConfig)}


class UsageError(Exception):
    pass


# --- settings -------------------------------------------------------------

# run settings that are not model fields: name -> (default, parser)
RUN_SETTINGS: dict[str, tuple[Any, Callable[[str], Any]]] = {
    "workers": (1, int),
    "memory_limit": (100_000, int),
    "ratios": ((0.8, 0.1, 0.1), lambda s: tuple(float(x) for x in s.split(","))),
    "complete_only": (False, lambda s: s.lower() in ("1", "true", "yes", "on")),
    "top_k": (10, int),
    "threshold": (0.5, float),
    "max_sweeps": (5, int),
    "ks": (DEFAULT_KS, lambda s: tuple(int(x) for x in s.split(","))),
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def resolve_settings(args: argparse.Namespace, keys: Sequence[str], model: bool) -> dict[str, Any]:
    """Defaults, then the ``--config`` file, then explicit flags."""
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        raw = load_flat_config(args.config)
        file_values = {k.replace("-", "_"): v for k, v in raw.items()}
        known = set(keys) | (MODEL_FIELDS if model else set()) | {"seed", "output_dir"}
        unknown = sorted(set(file_values) - known)
        if unknown:
            raise UsageError(f"{args.config}: unknown settings {unknown}")
    out: dict[str, Any] = {}
    for k in keys:
        default, parse = RUN_SETTINGS[k]
        out[k] = parse(file_values[k]) if k in file_values else default
        flag = getattr(args, k, None)
        if flag is not None:
            out[k] = parse(flag)
    seed = getattr(args, "seed", None)
    out["seed"] = int(seed) if seed is not None else int(file_values.get("seed", 0))
    if model:
        raw = {k: v for k, v in file_values.items() if k in MODEL_FIELDS}
        for k in MODEL_FIELDS:
            v = getattr(args, f"model_{k}", None)
            if v is not None:
                raw[k] = v
        fields = coerce_model_fields(raw)
        fields["seed"] = out["seed"]
        out["model"] = ModelConfig.from_dict(fields)
    out["output_dir"] = (
        getattr(args, "output_dir", None) or os.environ.get(OUTPUT_ENV) or file_values.get("output_dir") or "."
    )
    return out


def _require(path, what: str, directory: bool = False) -> Path:
    if path is None:
        raise UsageError(f"missing {what}")
    p = Path(path)
    ok = p.is_dir() if directory else p.is_file()
    if not ok:
        raise UsageError(f"{what} not found: {p}")
    return p


def _finish(outs: OutputSet, command: str, settings: dict, inputs: Sequence, extra: Optional[dict] = None) -> None:
    """Digest every written output, add the manifest, then move all into place."""
    finals = outs.finals
    digests = {str(f): artifacts.file_digest(outs._pending[f]) for f in finals}
    config = {k: (v.to_dict() if isinstance(v, ModelConfig) else v) for k, v in settings.items() if k != "output_dir"}
    text = artifacts.manifest(command, config, settings["seed"], artifacts.input_digests(inputs), digests, extra)
    outs.path(f"{command}.manifest.json").write_text(text, encoding="utf-8")
    outs.commit()


def _subset(records, ids_path):
    if ids_path is None:
        return records
    wanted = read_pmid_list(_require(ids_path, "PMID list"))
    by_pmid = {r.pmid: r for r in records}
    missing = [p for p in wanted if p not in by_pmid]
    if missing:
        raise UsageError(f"{ids_path}: {len(missing)} PMIDs not in the record file (first: {missing[0]})")
    return [by_pmid[p] for p in wanted]


def _gold_sets(records, label_uis: list[str]) -> tuple[list[frozenset[int]], int, int]:
    """Gold ordinals per record.

    Gold descriptors outside ``label_uis`` get ordinals past the end, so they
    count as misses instead of vanishing.  Returns (gold, n_labels, n_extra).
    """
    index = {ui: i for i, ui in enumerate(label_uis)}
    extra: dict[str, int] = {}
    gold = []
    for r in records:
        s = set()
        for ui in r.mesh:
            j = index.get(ui)
            if j is None:
                j = extra.setdefault(ui, len(label_uis) + len(extra))
            s.add(j)
        gold.append(frozenset(s))
    return gold, len(label_uis) + len(extra), len(extra)


def _align(records, pmids: Sequence[str], path) -> list:
    by_pmid = {r.pmid: r for r in records}
    missing = [p for p in pmids if p not in by_pmid]
    if missing:
        raise UsageError(f"{path}: {len(missing)} documents have no gold record (first: {missing[0]})")
    return [by_pmid[p] for p in pmids]


# --- commands -------------------------------------------------------------


def cmd_build_corpus(args) -> int:
    st = resolve_settings(args, ["workers", "memory_limit"], model=False)
    bioc = _require(args.bioc_dir, "BioC directory", directory=True)
    medline = _require(args.medline_dir, "MEDLINE directory", directory=True)
    with OutputSet(st["output_dir"]) as outs:
        rec_path = outs.path(args.out)
        counts = build_corpus(bioc, medline, rec_path, workers=st["workers"], memory_limit=st["memory_limit"])
        summary = {
            "parsed": {"bioc_articles": counts.articles_parsed, "medline_citations": counts.citations_parsed},
            "filtered": {
                "kept": counts.citations_kept,
                "non_english": counts.rejected_language,
                "not_human_indexed": counts.rejected_mode,
                "no_year": counts.rejected_no_year,
            },
            "joined": counts.joined,
            "files": {"bioc": counts.bioc_files, "medline": counts.medline_files},
        }
        _finish(outs, "build-corpus", st, [bioc, medline], {"counts": summary})
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_stats(args) -> int:
    st = resolve_settings(args, [], model=False)
    path = _require(args.records, "record file")
    stats = corpus_stats(read_records(path))
    with OutputSet(st["output_dir"]) as outs:
        outs.path(args.out).write_text(json.dumps(stats_to_json(stats), indent=2) + "\n", encoding="utf-8")
        _finish(outs, "stats", st, [path])
    return 0


def cmd_split(args) -> int:
    st = resolve_settings(args, ["ratios", "complete_only"], model=False)
    path = _require(args.records, "record file")
    records = read_records(path)
    if st["complete_only"]:
        records = select_complete(records)
    try:
        spec = SplitSpec(tuple(st["ratios"]), st["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    parts = stratified_split(records, spec)
    with OutputSet(st["output_dir"]) as outs:
        for name, recs in zip(("train", "validation", "test"), parts):
            outs.path(f"{name}.txt").write_text("".join(f"{r.pmid}\n" for r in recs), encoding="utf-8")
        sizes = {name: len(p) for name, p in zip(("train", "validation", "test"), parts)}
        _finish(outs, "split", st, [path], {"sizes": sizes})
    return 0


def cmd_train(args) -> int:
    st = resolve_settings(args, [], model=True)
    cfg: ModelConfig = st["model"]
    rec_path = _require(args.records, "record file")
    mesh_path = _require(args.mesh, "descriptor file")
    emb_path = _require(args.embeddings, "embedding file") if args.embeddings else None
    records = read_records(rec_path)
    train_recs = _subset(records, args.train_ids)
    val_recs = _subset(records, args.val_ids) if args.val_ids else None
    if not train_recs:
        raise UsageError("training set is empty")
    mesh = load_vocabulary(mesh_path)
    vectors = load_word_vectors(emb_path) if emb_path else None
    bundle, result = fit(train_recs, mesh, cfg, val_recs, vectors)
    with OutputSet(st["output_dir"]) as outs:
        save_bundle(outs.path(args.out), bundle)
        trace = {
            "loss": result.loss_trace,
            "validation_micro_f": result.val_micro_f,
            "best_epoch": result.best_epoch,
            "epochs_run": result.epochs_run,
        }
        outs.path("train-log.json").write_text(json.dumps(trace, indent=1) + "\n", encoding="utf-8")
        inputs = [rec_path, mesh_path, emb_path, args.train_ids, args.val_ids]
        _finish(outs, "train", st, inputs, {"best_epoch": result.best_epoch, "epochs_run": result.epochs_run})
    return 0


def cmd_predict(args) -> int:
    st = resolve_settings(args, ["top_k"], model=False)
    model_path = _require(args.model, "model file")
    rec_path = _require(args.records, "record file")
    expected = load_vocabulary(_require(args.mesh, "descriptor file")).uis if args.mesh else None
    bundle = load_bundle(model_path, expected)
    records = _subset(read_records(rec_path), args.ids)
    scores = score_records(bundle, records) if records else np.zeros((0, len(bundle.label_uis)))
    pmids = [r.pmid for r in records]
    with OutputSet(st["output_dir"]) as outs:
        artifacts.write_top_k(outs.path(args.out), pmids, bundle.label_uis, scores, st["top_k"])
        if args.scores_out:
            artifacts.write_scores(outs.path(args.scores_out), pmids, bundle.label_uis, scores)
        st["model_config_sha256"] = bundle.config.digest()
        _finish(outs, "predict", st, [model_path, rec_path, args.ids, args.mesh])
    return 0


def cmd_tune(args) -> int:
    st = resolve_settings(args, ["max_sweeps"], model=False)
    score_path = _require(args.scores, "score file")
    gold_path = _require(args.gold, "gold record file")
    pmids, labels, scores = artifacts.read_scores(score_path)
    if not pmids:
        raise UsageError(f"{score_path}: no documents to tune on")
    recs = _align(read_records(gold_path), pmids, score_path)
    gold, _, _ = _gold_sets(recs, labels)
    # descriptors outside the score file cannot be thresholded; drop them here
    gold = [frozenset(j for j in g if j < len(labels)) for g in gold]
    res = tune_thresholds(scores, gold, max_sweeps=st["max_sweeps"])
    with OutputSet(st["output_dir"]) as outs:
        artifacts.write_thresholds(outs.path(args.out), labels, res.thresholds, res.micro_f, res.sweeps)
        _finish(outs, "tune-thresholds", st, [score_path, gold_path], {"micro_f": res.micro_f})
    return 0


def cmd_evaluate(args) -> int:
    st = resolve_settings(args, ["threshold", "ks", "workers"], model=False)
    gold_path = _require(args.gold, "gold record file")
    gold_recs = read_records(gold_path)
    inputs: list = [gold_path]
    scores = None
    if args.scores:
        score_path = _require(args.scores, "score file")
        inputs.append(score_path)
        pmids, labels, scores = artifacts.read_scores(score_path)
        if args.thresholds:
            th_path = _require(args.thresholds, "threshold file")
            inputs.append(th_path)
            th_labels, tau = artifacts.read_thresholds(th_path)
            if th_labels != labels:
                raise UsageError(f"{th_path}: labels do not match {score_path}")
        else:
            tau = np.full(len(labels), st["threshold"])
        pred = apply_thresholds(scores, tau) if pmids else []
    elif args.predictions:
        pred_path = _require(args.predictions, "prediction file")
        inputs.append(pred_path)
        sets = artifacts.read_label_sets(pred_path)
        pmids = list(sets)
        if args.mesh:
            labels = load_vocabulary(_require(args.mesh, "descriptor file")).uis
            inputs.append(args.mesh)
        else:
            labels = sorted({u for v in sets.values() for u in v} | {u for r in gold_recs for u in r.mesh})
        index = {u: i for i, u in enumerate(labels)}
        unknown = sorted({u for v in sets.values() for u in v} - set(index))
        if unknown:
            raise UsageError(f"{pred_path}: predicted descriptors not in the label set (first: {unknown[0]})")
        pred = [frozenset(index[u] for u in sets[p]) for p in pmids]
    else:
        raise UsageError("evaluate needs --scores or --predictions")
    recs = _align(gold_recs, pmids, args.scores or args.predictions)
    gold, n_labels, n_extra = _gold_sets(recs, labels)
    if scores is not None and n_extra:
        scores = np.hstack([scores, np.zeros((len(pmids), n_extra))])
    report = evaluate(gold, pred, n_labels, scores, ks=st["ks"]).to_dict()
    report["gold_labels_outside_label_set"] = n_extra
    with OutputSet(st["output_dir"]) as outs:
        outs.path(args.out).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        _finish(outs, "evaluate", st, inputs)
    print(json.dumps(report["bipartition"], sort_keys=True))
    return 0


# --- parser ---------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value settings file; flags take precedence")
    p.add_argument("--output-dir", help=f"where outputs go (default ${OUTPUT_ENV} or .)")
    p.add_argument("--seed", help="random seed recorded in the manifest (default 0)")


def _run_flags(p: argparse.ArgumentParser, names: Sequence[str]) -> None:
    for n in names:
        p.add_argument(_flag(n), dest=n, help=f"default {RUN_SETTINGS[n][0]}")


def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model settings (also accepted in --config)")
    for f in dataclasses.fields(ModelConfig):
        if f.name == "seed":
            continue
        g.add_argument(_flag(f.name), dest=f"model_{f.name}", metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshidx", description="MeSH indexing pipeline: corpus building, training, prediction and scoring.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="parse BioC and MEDLINE XML into joined records")
    _common(p)
    p.add_argument("--bioc-dir", required=True)
    p.add_argument("--medline-dir", required=True)
    p.add_argument("--out", default="records.jsonl")
    _run_flags(p, ["workers", "memory_limit"])
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("stats", help="per-section article counts and average lengths")
    _common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--out", default="stats.json")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="year-stratified train/validation/test PMID lists")
    _common(p)
    p.add_argument("--records", required=True)
    _run_flags(p, ["ratios", "complete_only"])
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model and write a model file")
    _common(p)
    p.add_argument("--records", required=True)
    p.add_argument("--mesh", required=True, help="descriptor TSV")
    p.add_argument("--train-ids", help="PMID list (default: every record)")
    p.add_argument("--val-ids", help="PMID list for early stopping")
    p.add_argument("--embeddings", help="optional word-vector text file")
    p.add_argument("--out", default="model.ckpt")
    _model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score records with a trained model")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--ids", help="PMID list (default: every record)")
    p.add_argument("--mesh", help="descriptor TSV that must match the model's labels")
    p.add_argument("--out", default="predictions.jsonl")
    p.add_argument("--scores-out", help="also write the full score file under this name")
    _run_flags(p, ["top_k"])
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("tune-thresholds", help="per-label thresholds maximising micro-F")
    _common(p)
    p.add_argument("--scores", required=True)
    p.add_argument("--gold", required=True, help="record file holding the gold descriptors")
    p.add_argument("--out", default="thresholds.json")
    _run_flags(p, ["max_sweeps"])
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="bipartition and ranking metrics")
    _common(p)
    p.add_argument("--gold", required=True, help="record file holding the gold descriptors")
    p.add_argument("--scores")
    p.add_argument("--thresholds")
    p.add_argument("--predictions")
    p.add_argument("--mesh", help="label set for --predictions")
    p.add_argument("--out", default="metrics.json")
    _run_flags(p, ["threshold", "ks", "workers"])
    p.set_defaults(func=cmd_evaluate)
    return parser


EXPECTED_ERRORS = (
    UsageError,
    FileParseError,
    FormatError,
    SchemaError,
    VocabularyError,
    VocabularyMismatch,
    CheckpointError,
    ValueError,
    OSError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except EXPECTED_ERRORS as exc:
        print(f"meshidx {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
