import json
import shutil
from pathlib import Path

import pytest

from meshidx.cli import main
from meshidx.corpus import ArticleRecord, read_records, write_records
from meshidx.mesh_graph import write_vocabulary
from meshidx.synthetic import synthetic_corpus

FIXTURES = Path(__file__).parent / "fixtures"

OVERFIT_FLAGS = [
    "--d", "16", "--conv-channels", "16", "--epochs", "200", "--lr", "0.01", "--decay", "0.99",
    "--dropout", "0", "--min-freq", "1", "--batch-size", "8",
    "--channel-lengths", "title_abstract:64,intro:96,methods:96,results:96,discuss:96",
]  # fmt: skip


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def manifest(directory, command):
    return json.loads((Path(directory) / f"{command}.manifest.json").read_text())


@pytest.fixture(scope="module")
def overfit_run(tmp_path_factory):
    """The 32-document synthetic corpus trained through the command line."""
    d = tmp_path_factory.mktemp("overfit")
    mesh, recs = synthetic_corpus(32, 20, seed=0)
    write_vocabulary(mesh, d / "mesh.tsv")
    write_records(recs, d / "records.jsonl")
    code = main(["train", "--records", str(d / "records.jsonl"), "--mesh", str(d / "mesh.tsv"),
                 "--output-dir", str(d), "--seed", "0", *OVERFIT_FLAGS])  # fmt: skip
    assert code == 0
    return d


# --- build-corpus ---------------------------------------------------------


def test_build_corpus_golden(tmp_path, capsys):
    code, out, _ = run(capsys, "build-corpus", "--bioc-dir", FIXTURES / "bioc", "--medline-dir",
                       FIXTURES / "medline", "--output-dir", tmp_path)  # fmt: skip
    assert code == 0
    assert (tmp_path / "records.jsonl").read_bytes() == (FIXTURES / "golden" / "records.jsonl").read_bytes()
    m = manifest(tmp_path, "build-corpus")
    assert m["counts"]["parsed"] == {"bioc_articles": 3, "medline_citations": 4}
    assert m["counts"]["joined"] == 2
    assert m["seed"] == 0
    assert len(m["config_sha256"]) == 64
    assert len(m["inputs"]) == 5
    assert json.loads(out)["joined"] == 2


def test_build_corpus_empty_dirs(tmp_path, capsys):
    (tmp_path / "b").mkdir()
    (tmp_path / "m").mkdir()
    code, _, _ = run(capsys, "build-corpus", "--bioc-dir", tmp_path / "b", "--medline-dir", tmp_path / "m",
                     "--output-dir", tmp_path / "out")  # fmt: skip
    assert code == 0
    assert (tmp_path / "out" / "records.jsonl").read_bytes() == b""


def test_build_corpus_malformed_file(tmp_path, capsys):
    bioc = tmp_path / "bioc"
    shutil.copytree(FIXTURES / "bioc", bioc)
    (bioc / "broken.xml").write_text("<collection><document><id>1</id>")
    out = tmp_path / "out"
    code, _, err = run(capsys, "build-corpus", "--bioc-dir", bioc, "--medline-dir", FIXTURES / "medline",
                       "--output-dir", out)  # fmt: skip
    assert code != 0
    assert "broken.xml" in err
    assert list(out.iterdir()) == []


def test_missing_input_directory(tmp_path, capsys):
    code, _, err = run(capsys, "build-corpus", "--bioc-dir", tmp_path / "nope", "--medline-dir", tmp_path,
                       "--output-dir", tmp_path)  # fmt: skip
    assert code != 0 and "nope" in err


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MESHIDX_OUTPUT_DIR", str(tmp_path / "env"))
    code, _, _ = run(capsys, "build-corpus", "--bioc-dir", FIXTURES / "bioc", "--medline-dir", FIXTURES / "medline")
    assert code == 0
    assert (tmp_path / "env" / "records.jsonl").exists()


# --- stats and split ------------------------------------------------------


def thirty_docs():
    return [
        ArticleRecord(pmid=str(1000 + 10 * y + i), title="t", abstract="a", year=2000 + y, mesh={"D1": "x"})
        for y in range(3)
        for i in range(10)
    ]


def test_stats(tmp_path, capsys):
    code, _, _ = run(capsys, "stats", "--records", FIXTURES / "golden" / "records.jsonl", "--output-dir", tmp_path)
    assert code == 0
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert stats["TITLE"]["number_of_articles"] == 2


def test_split_counts_and_idempotence(tmp_path, capsys):
    write_records(thirty_docs(), tmp_path / "r.jsonl")
    outs = []
    for name in ("a", "b"):
        code, _, _ = run(capsys, "split", "--records", tmp_path / "r.jsonl", "--ratios", "0.8,0.1,0.1",
                         "--seed", "7", "--output-dir", tmp_path / name)  # fmt: skip
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir() if p.suffix == ".txt"})
    assert outs[0] == outs[1]
    years = {r.pmid: r.year for r in thirty_docs()}
    for y in (2000, 2001, 2002):
        sizes = [sum(years[p] == y for p in outs[0][f"{n}.txt"].decode().split()) for n in ("train", "validation", "test")]
        assert sizes == [8, 1, 1]
    assert manifest(tmp_path / "a", "split")["seed"] == 7


def test_split_bad_ratios(tmp_path, capsys):
    write_records(thirty_docs(), tmp_path / "r.jsonl")
    code, _, err = run(capsys, "split", "--records", tmp_path / "r.jsonl", "--ratios", "0.5,0.1,0.1",
                       "--output-dir", tmp_path / "o")  # fmt: skip
    assert code != 0 and "sum to 1" in err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    write_records(thirty_docs(), tmp_path / "r.jsonl")
    (tmp_path / "run.cfg").write_text("seed = 5\nratios = 0.5,0.25,0.25\n")
    run(capsys, "split", "--records", tmp_path / "r.jsonl", "--config", tmp_path / "run.cfg", "--output-dir", tmp_path / "a")
    m = manifest(tmp_path / "a", "split")
    assert m["seed"] == 5 and m["config"]["ratios"] == [0.5, 0.25, 0.25]
    run(capsys, "split", "--records", tmp_path / "r.jsonl", "--config", tmp_path / "run.cfg", "--seed", "9",
        "--output-dir", tmp_path / "b")  # fmt: skip
    assert manifest(tmp_path / "b", "split")["seed"] == 9


def test_unknown_config_key(tmp_path, capsys):
    write_records(thirty_docs(), tmp_path / "r.jsonl")
    (tmp_path / "run.cfg").write_text("colour = blue\n")
    code, _, err = run(capsys, "split", "--records", tmp_path / "r.jsonl", "--config", tmp_path / "run.cfg",
                       "--output-dir", tmp_path / "a")  # fmt: skip
    assert code != 0 and "colour" in err


# --- evaluate and tune ----------------------------------------------------


def perfect_fixture(tmp_path):
    recs = [
        ArticleRecord(pmid="1", title="x", mesh={"D000001": "a", "D000002": "b"}),
        ArticleRecord(pmid="2", title="y", mesh={"D000003": "c"}),
        ArticleRecord(pmid="3", title="z", mesh={"D000001": "a"}),
    ]
    write_records(recs, tmp_path / "gold.jsonl")
    lines = [{"pmid": r.pmid, "labels": sorted(r.mesh)} for r in recs]
    (tmp_path / "pred.jsonl").write_text("".join(json.dumps(x) + "\n" for x in lines))
    return recs


def test_evaluate_perfect_predictions(tmp_path, capsys):
    perfect_fixture(tmp_path)
    code, _, _ = run(capsys, "evaluate", "--gold", tmp_path / "gold.jsonl", "--predictions", tmp_path / "pred.jsonl",
                     "--output-dir", tmp_path)  # fmt: skip
    assert code == 0
    report = json.loads((tmp_path / "metrics.json").read_text())
    for group in report["bipartition"].values():
        assert all(v == 1.0 for v in group.values()), group


def test_tune_then_evaluate_scores(tmp_path, capsys):
    perfect_fixture(tmp_path)
    scores = {"1": [0.9, 0.7, 0.2], "2": [0.3, 0.1, 0.6], "3": [0.8, 0.4, 0.3]}
    lines = [{"labels": ["D000001", "D000002", "D000003"]}] + [{"pmid": p, "scores": s} for p, s in scores.items()]
    (tmp_path / "scores.jsonl").write_text("".join(json.dumps(x) + "\n" for x in lines))
    code, _, _ = run(capsys, "tune-thresholds", "--scores", tmp_path / "scores.jsonl", "--gold", tmp_path / "gold.jsonl",
                     "--output-dir", tmp_path)  # fmt: skip
    assert code == 0
    th = json.loads((tmp_path / "thresholds.json").read_text())
    assert th["micro_f"] == 1.0
    code, _, _ = run(capsys, "evaluate", "--gold", tmp_path / "gold.jsonl", "--scores", tmp_path / "scores.jsonl",
                     "--thresholds", tmp_path / "thresholds.json", "--output-dir", tmp_path)  # fmt: skip
    assert code == 0
    report = json.loads((tmp_path / "metrics.json").read_text())
    assert report["bipartition"]["micro_averaged"]["MiF"] == 1.0
    assert report["ranking"]["P@1"] == 1.0


def test_evaluate_schema_error(tmp_path, capsys):
    perfect_fixture(tmp_path)
    (tmp_path / "scores.jsonl").write_text('{"labels": ["D000001"]}\n{"pmid": "1", "scores": [0.5, 0.5]}\n')
    code, _, err = run(capsys, "evaluate", "--gold", tmp_path / "gold.jsonl", "--scores", tmp_path / "scores.jsonl",
                       "--output-dir", tmp_path / "o")  # fmt: skip
    assert code != 0 and "scores.jsonl:2" in err
    assert not (tmp_path / "o" / "metrics.json").exists()


# --- train / predict ------------------------------------------------------


def test_train_predict_evaluate_overfit(overfit_run, tmp_path, capsys):
    d = overfit_run
    assert manifest(d, "train")["config"]["model"]["epochs"] == 200
    code, _, _ = run(capsys, "predict", "--model", d / "model.ckpt", "--records", d / "records.jsonl",
                     "--mesh", d / "mesh.tsv", "--scores-out", "scores.jsonl", "--output-dir", tmp_path)  # fmt: skip
    assert code == 0
    code, _, _ = run(capsys, "evaluate", "--gold", d / "records.jsonl", "--scores", tmp_path / "scores.jsonl",
                     "--output-dir", tmp_path)  # fmt: skip
    assert code == 0
    report = json.loads((tmp_path / "metrics.json").read_text())
    assert report["bipartition"]["example_based"]["EBF"] >= 0.95
    first = json.loads((tmp_path / "predictions.jsonl").read_text().splitlines()[0])
    assert len(first["top_k"]) == 10 and first["pmid"] == read_records(d / "records.jsonl")[0].pmid


def test_predict_is_idempotent(overfit_run, tmp_path, capsys):
    d = overfit_run
    for name in ("a", "b"):
        code, _, _ = run(capsys, "predict", "--model", d / "model.ckpt", "--records", d / "records.jsonl",
                         "--scores-out", "scores.jsonl", "--output-dir", tmp_path / name)  # fmt: skip
        assert code == 0
    for f in ("predictions.jsonl", "scores.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ma, mb = manifest(tmp_path / "a", "predict"), manifest(tmp_path / "b", "predict")
    assert ma["config_sha256"] == mb["config_sha256"] and ma["inputs"] == mb["inputs"]


def test_predict_rejects_other_vocabulary(overfit_run, tmp_path, capsys):
    d = overfit_run
    other, _ = synthetic_corpus(2, 21, seed=0)
    write_vocabulary(other, tmp_path / "other.tsv")
    code, _, err = run(capsys, "predict", "--model", d / "model.ckpt", "--records", d / "records.jsonl",
                       "--mesh", tmp_path / "other.tsv", "--output-dir", tmp_path / "o")  # fmt: skip
    assert code != 0 and "does not match" in err
    assert not (tmp_path / "o" / "predictions.jsonl").exists()


def test_predict_rejects_corrupt_model(tmp_path, capsys):
    (tmp_path / "bad.ckpt").write_bytes(b"not a model")
    write_records(thirty_docs(), tmp_path / "r.jsonl")
    code, _, err = run(capsys, "predict", "--model", tmp_path / "bad.ckpt", "--records", tmp_path / "r.jsonl",
                       "--output-dir", tmp_path / "o")  # fmt: skip
    assert code != 0 and "bad.ckpt" in err
