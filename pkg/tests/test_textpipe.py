import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sonmf_kit.api import fit
from sonmf_kit.textpipe import (BagOfWords, build_bag_of_words, format_topics,
                                project_features, read_corpus, tokenize, topic_summary,
                                train_test_split, vectorize, weight_matrix, write_features)

ORTHO = ["hip", "knee", "ankle", "fracture", "bone", "femur", "tibia", "cast"]
RESP = ["cough", "fever", "breath", "lung", "wheeze", "asthma", "oxygen", "chest"]


def planted_corpus(n_docs=40, seed=0):
    r = np.random.default_rng(seed)
    docs = []
    for i in range(n_docs):
        group = ORTHO if i % 2 == 0 else RESP
        docs.append(" ".join(r.choice(group, 12)))
    return docs


def test_hand_counted_example():
    bow = build_bag_of_words(["fell on the ice, fell hard"], stopwords={"on", "the"})
    assert bow.vocabulary == ["fell", "hard", "ice"]
    np.testing.assert_array_equal(bow.counts[:, 0], [2, 1, 1])


def test_tokenize_strips_digits_and_punctuation():
    assert tokenize("Fell 3x, on-the ICE!!", stopwords=set()) == ["fell", "x", "on", "the", "ice"]
    assert tokenize("the patients were running", ) == ["patient", "run"]


def test_duplicate_documents_identical_columns():
    bow = build_bag_of_words(["knee pain after fall", "cough", "knee pain after fall"])
    np.testing.assert_array_equal(bow.counts[:, 0], bow.counts[:, 2])


def test_min_doc_freq_drops_rare_terms():
    r = np.random.default_rng(1)
    common = ["hip", "knee", "ankle", "cough", "fever"]
    docs = [" ".join(r.choice(common, 6)) + f" rare{chr(97 + i // 26)}{chr(97 + i % 26)}"
            for i in range(100)]
    full = build_bag_of_words(docs, stopwords=set())
    bow = build_bag_of_words(docs, min_doc_freq=2, stopwords=set())
    assert full.document_frequency.min() == 1
    assert bow.document_frequency.min() >= 2
    assert len(bow.vocabulary) < len(full.vocabulary)


def test_vocabulary_independent_of_document_order():
    docs = planted_corpus(10)
    a = build_bag_of_words(docs)
    perm = np.random.default_rng(0).permutation(10)
    b = build_bag_of_words([docs[i] for i in perm], doc_ids=[str(i) for i in perm])
    assert a.vocabulary == b.vocabulary
    np.testing.assert_array_equal(a.counts[:, perm], b.counts)


def test_build_errors():
    with pytest.raises(ValueError):
        build_bag_of_words([])
    with pytest.raises(ValueError):
        build_bag_of_words(["the and of", "123 !!"])
    with pytest.raises(ValueError):
        build_bag_of_words(["a b"], min_doc_freq=0)


def test_tfidf_examples():
    counts = np.array([[3.0, 1.0], [2.0, 0.0]])
    W = weight_matrix(counts, "tfidf")
    assert W[0, 0] == 0.0 and W[0, 1] == 0.0
    assert W[1, 1] == 0.0
    assert W[1, 0] == pytest.approx(2 * math.log(2))
    assert W[1, 0] == pytest.approx(1.3863, abs=1e-4)


@given(st.lists(st.lists(st.integers(0, 5), min_size=4, max_size=4), min_size=1, max_size=6))
def test_weighting_ranges(rows):
    counts = np.array(rows, dtype=float)
    B = weight_matrix(counts, "binary")
    assert set(np.unique(B)) <= {0.0, 1.0}
    assert np.all(weight_matrix(counts, "tfidf") >= 0)
    np.testing.assert_array_equal(weight_matrix(counts, "tfidf")[counts == 0], 0)


def test_unknown_weighting():
    with pytest.raises(ValueError):
        weight_matrix(np.ones((2, 2)), "bm25")


def test_projection_identities(rng):
    X = rng.uniform(size=(6, 4))
    F = rng.normal(size=(6, 2))
    np.testing.assert_array_equal(project_features(X, F), project_features(X.copy(), F))
    np.testing.assert_allclose(project_features(X, np.eye(6)), X.T)
    with pytest.raises(ValueError):
        project_features(X, np.ones((5, 2)))


@given(st.integers(0, 2**31 - 1))
def test_projection_is_linear(seed):
    r = np.random.default_rng(seed)
    X1, X2 = r.uniform(size=(9, 5)), r.uniform(size=(9, 5))
    F = r.normal(size=(9, 3))
    np.testing.assert_allclose(project_features(X1 + X2, F),
                               project_features(X1, F) + project_features(X2, F), atol=1e-12)


def test_train_test_consistency_and_self_consistency():
    docs = planted_corpus(60, seed=2)
    train, test = docs[:45], docs[45:] + ["hip xylophone zebra"]
    bow = build_bag_of_words(train)
    X = weight_matrix(bow, "tfidf")
    res = fit(X, "sonmf", 10)
    G_proj = project_features(X, res.F)
    # least squares on the training matrix reproduces the projection exactly
    B = np.linalg.lstsq(X.T, G_proj, rcond=None)[0]
    np.testing.assert_allclose(X.T @ B, G_proj, atol=1e-10)
    with pytest.warns(UserWarning, match="out-of-vocabulary"):
        tb = vectorize(test, bow.vocabulary)
    assert tb.counts.shape == (len(bow.vocabulary), len(test))
    # a test document identical to a training one gets identical features
    same = vectorize([train[3]], bow.vocabulary)
    np.testing.assert_allclose(
        project_features(weight_matrix(same, "tfidf", idf=np.log(45 / bow.document_frequency)),
                         res.F)[0], G_proj[3], atol=1e-12)


def test_topic_summary_examples():
    F = np.array([[0.8], [-0.5], [0.1]])
    [s] = topic_summary(F, ["hip", "ankle", "knee"], m=1)
    assert s.positive == [("hip", 0.8)] and s.negative == [("ankle", -0.5)]
    assert not s.short
    [s] = topic_summary(np.array([[0.3], [0.2]]), ["a", "b"], m=1)
    assert s.negative == [] and s.short


def test_topic_summary_ties_and_order():
    F = np.array([[0.5], [0.5], [0.9], [-0.2], [-0.2]])
    [s] = topic_summary(F, ["zeta", "alpha", "mid", "yy", "bb"], m=3)
    assert [t for t, _ in s.positive] == ["mid", "alpha", "zeta"]
    assert [t for t, _ in s.negative] == ["bb", "yy"]


def test_topic_summary_permutation_invariant(rng):
    F = rng.normal(size=(12, 3))
    vocab = [f"t{i:02d}" for i in range(12)]
    perm = rng.permutation(12)
    a = topic_summary(F, vocab, m=4)
    b = topic_summary(F[perm], [vocab[i] for i in perm], m=4)
    for x, y in zip(a, b):
        assert x.positive == y.positive and x.negative == y.negative


def test_topic_summary_errors():
    with pytest.raises(ValueError):
        topic_summary(np.ones((2, 1)), ["a"], m=1)


def test_planted_topics_recovered():
    bow = build_bag_of_words(planted_corpus())
    res = fit(weight_matrix(bow, "tfidf"), "sonmf", 2)
    tops = [{t for t, _ in s.positive} for s in topic_summary(res.F, bow.vocabulary, m=5)]
    ortho = {tokenize(w)[0] for w in ORTHO}
    resp = {tokenize(w)[0] for w in RESP}
    assert (tops[0] <= ortho and tops[1] <= resp) or (tops[0] <= resp and tops[1] <= ortho)


def test_format_topics_rows():
    F = np.array([[0.8, 0.1], [-0.5, 0.2], [0.1, 0.3]])
    text = format_topics(topic_summary(F, ["hip", "ankle", "knee"], m=2))
    lines = text.splitlines()
    assert lines[0].split("\t") == ["topic", "side", "rank", "term", "weight", "flag"]
    assert len(lines) == 1 + 2 * 2 * 2
    assert sum(ln.endswith("short") for ln in lines) == 1 + 2


def test_read_corpus_formats(tmp_path):
    txt = tmp_path / "c.txt"
    txt.write_text("first doc\n\nsecond doc\n", encoding="utf-8")
    assert read_corpus(txt) == (["first doc", "second doc"], None)
    csv_path = tmp_path / "c.csv"
    csv_path.write_text('label,text\nA,"hip, knee"\nB,cough\n', encoding="utf-8")
    assert read_corpus(csv_path) == (["hip, knee", "cough"], ["A", "B"])
    bad = tmp_path / "bad.csv"
    bad.write_text("A,b,c\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_corpus(bad)


def test_write_features_header(tmp_path):
    path = tmp_path / "f.csv"
    write_features(path, ["d0", "d1"], ["A", "B"], np.array([[1.0, -2.0], [0.5, 0.0]]))
    lines = path.read_text().splitlines()
    assert lines[0] == "doc_id,label,f1,f2"
    assert lines[1] == "d0,A,1.0,-2.0"


def test_split_deterministic():
    a = train_test_split(50, 0.2, seed=9)
    b = train_test_split(50, 0.2, seed=9)
    np.testing.assert_array_equal(a[0], b[0])
    assert len(a[1]) == 10 and not set(a[0]) & set(a[1])
    with pytest.raises(ValueError):
        train_test_split(5, 1.0)


def test_bag_of_words_shape_check():
    with pytest.raises(ValueError):
        BagOfWords(["a"], np.zeros((2, 1)), ["d"])
