import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meshidx.mesh_graph import (
    MeshDescriptor,
    MeshVocabulary,
    VocabularyError,
    WordVectors,
    build_adjacency,
    descriptor_tokens,
    init_label_embeddings,
    load_vocabulary,
    load_word_vectors,
    write_vocabulary,
)


def vocab_of(*rows):
    return MeshVocabulary.from_descriptors(MeshDescriptor(u, n, tuple(t)) for u, n, t in rows)


def prefix_walk_oracle(vocab):
    """Edge iff some pair of tree numbers differs by exactly one trailing component."""
    n = len(vocab)
    a = np.eye(n)
    for i, di in enumerate(vocab.descriptors):
        for j, dj in enumerate(vocab.descriptors):
            if i == j:
                continue
            for ti in di.tree_numbers:
                for tj in dj.tree_numbers:
                    pi, pj = ti.split("."), tj.split(".")
                    if (len(pi) == len(pj) + 1 and pi[:-1] == pj) or (len(pj) == len(pi) + 1 and pj[:-1] == pi):
                        a[i, j] = 1
    return a


def test_load_vocabulary(tmp_path):
    f = tmp_path / "mesh.tsv"
    f.write_text("D000200\tAction Potentials\tG07.265.500\nD009474\tNeurons\tA08.675;A11.671\n")
    v = load_vocabulary(f)
    assert v.descriptors[0] == MeshDescriptor("D000200", "Action Potentials", ("G07.265.500",))
    assert v.index == {"D000200": 0, "D009474": 1}
    assert load_vocabulary(f).index == v.index


def test_load_vocabulary_duplicate(tmp_path):
    f = tmp_path / "mesh.tsv"
    f.write_text("D1\tA\tA01\nD1\tB\tA02\n")
    with pytest.raises(VocabularyError, match="duplicate"):
        load_vocabulary(f)


def test_load_vocabulary_malformed_reports_line(tmp_path):
    f = tmp_path / "mesh.tsv"
    f.write_text("D1\tA\tA01\njunk\n")
    with pytest.raises(VocabularyError, match=":2:"):
        load_vocabulary(f)


def test_vocabulary_round_trip(tmp_path):
    v = vocab_of(("D1", "Body Regions", ["A01"]), ("D2", "Head", ["A01.456"]), ("D3", "Orphan", []))
    write_vocabulary(v, tmp_path / "v.tsv")
    assert load_vocabulary(tmp_path / "v.tsv") == v


def test_single_descriptor():
    np.testing.assert_array_equal(build_adjacency(vocab_of(("D1", "x", ["A01"]))).toarray(), [[1.0]])


def test_chain_has_seven_nonzeros():
    v = vocab_of(("D1", "r", ["A01"]), ("D2", "m", ["A01.111"]), ("D3", "l", ["A01.111.222"]))
    a = build_adjacency(v).toarray()
    assert np.count_nonzero(a) == 7
    assert a[0, 2] == 0


def test_root_with_two_children_has_seven_nonzeros():
    v = vocab_of(("D1", "r", ["A01"]), ("D2", "a", ["A01.111"]), ("D3", "b", ["A01.222"]))
    a = build_adjacency(v).toarray()
    assert np.count_nonzero(a) == 7
    assert a[1, 2] == 0


def test_multiple_tree_numbers_join_both_subtrees():
    v = vocab_of(
        ("D1", "anatomy", ["A08"]),
        ("D2", "cells", ["A11"]),
        ("D3", "neurons", ["A08.675", "A11.671"]),
        ("D4", "motor neurons", ["A08.675.542", "A11.671.500"]),
    )
    adj = build_adjacency(v)
    np.testing.assert_array_equal(adj.toarray(), prefix_walk_oracle(v))
    # D1-D3 and D3-D4 come from first positions; D2-D3 needs the second one
    assert adj.multi_position_edges == 1


tree_st = st.lists(st.integers(1, 3), min_size=1, max_size=3).map(lambda xs: ".".join(f"{x:02d}" for x in xs))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(tree_st, min_size=0, max_size=2, unique=True), min_size=1, max_size=10))
def test_adjacency_matches_prefix_walk(trees):
    v = vocab_of(*[(f"D{i}", f"n{i}", t) for i, t in enumerate(trees)])
    a = build_adjacency(v).toarray()
    np.testing.assert_array_equal(a, a.T)
    np.testing.assert_array_equal(np.diag(a), 1.0)
    np.testing.assert_array_equal(a, prefix_walk_oracle(v))


def test_normalized_adjacency():
    v = vocab_of(("D1", "r", ["A01"]), ("D2", "a", ["A01.111"]))
    n = build_adjacency(v).normalized().toarray()
    np.testing.assert_allclose(n, [[0.5, 0.5], [0.5, 0.5]])


def test_coo_export():
    v = vocab_of(("D1", "r", ["A01"]), ("D2", "a", ["A01.111"]))
    assert build_adjacency(v).to_coo_text() == "0 0 1\n0 1 1\n1 0 1\n1 1 1\n"


def test_descriptor_tokens():
    assert descriptor_tokens("Models, Neurological") == ["models", "neurological"]


def test_label_embedding_average():
    emb = WordVectors({"single-cell": np.array([1.0, 0.0]), "analysis": np.array([0.0, 1.0])}, 2)
    v = vocab_of(("D059010", "Single-Cell Analysis", ["E05"]), ("D2", "Analysis", []), ("D3", "Zzz Qqq", []))
    out = init_label_embeddings(v, emb)
    np.testing.assert_array_equal(out, [[0.5, 0.5], [0.0, 1.0], [0.0, 0.0]])


def test_label_embedding_oov_counts_in_divisor():
    emb = WordVectors({"neurons": np.array([2.0, 4.0])}, 2)
    out = init_label_embeddings(vocab_of(("D1", "Motor Neurons", [])), emb)
    np.testing.assert_array_equal(out, [[1.0, 2.0]])


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 10_000))
def test_label_embedding_homogeneous(c, seed):
    rng = np.random.default_rng(seed)
    words = {"a": rng.normal(size=3), "b": rng.normal(size=3)}
    v = vocab_of(("D1", "A b", []))
    base = init_label_embeddings(v, WordVectors(words, 3))
    scaled = init_label_embeddings(v, WordVectors({k: c * w for k, w in words.items()}, 3))
    np.testing.assert_allclose(scaled, c * base, atol=1e-12)


def test_label_embedding_empty_name():
    v = MeshVocabulary.from_descriptors([MeshDescriptor("D1", " , ", ())])
    with pytest.raises(VocabularyError):
        init_label_embeddings(v, WordVectors({}, 2))


def test_load_word_vectors(tmp_path):
    f = tmp_path / "w.txt"
    f.write_text("2 3\nneurons 1 2 3\naction 0.5 0 -1\n")
    wv = load_word_vectors(f)
    assert wv.dim == 3 and len(wv) == 2
    np.testing.assert_array_equal(wv.get("action"), [0.5, 0, -1])
    f.write_text("a 1 2\nb 1\n")
    with pytest.raises(VocabularyError):
        load_word_vectors(f)
