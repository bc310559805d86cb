"""Term-document matrices from raw text, weighting, projection and topic lists.

Rows of every matrix here index vocabulary terms and columns index
documents, so a factorization ``X ~ F G^T`` gives word-topic ``F`` and
document-topic ``G``.
"""

import csv
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from nltk.stem.porter import PorterStemmer
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

WEIGHTINGS = ("tfidf", "binary")
DEFAULT_STOPWORDS = frozenset(ENGLISH_STOP_WORDS)

_NON_LETTERS = re.compile(r"[\W\d_]+")
_stemmer = PorterStemmer()


def tokenize(text, stopwords=DEFAULT_STOPWORDS):
    """Lowercase, drop digits and punctuation, remove stopwords, Porter-stem."""
    words = _NON_LETTERS.sub(" ", text.lower()).split()
    return [_stemmer.stem(w) for w in words if w not in stopwords]


@dataclass
class BagOfWords:
    vocabulary: List[str]
    counts: np.ndarray
    doc_ids: List[str]
    labels: Optional[List[str]] = None
    weighting: str = "raw"

    def __post_init__(self):
        if self.counts.shape != (len(self.vocabulary), len(self.doc_ids)):
            raise ValueError(f"counts shape {self.counts.shape} does not match "
                             f"{len(self.vocabulary)} terms x {len(self.doc_ids)} documents")

    @property
    def document_frequency(self):
        return np.count_nonzero(self.counts, axis=1)

    def stats(self):
        return {
            "terms": len(self.vocabulary),
            "documents": len(self.doc_ids),
            "nonzeros": int(np.count_nonzero(self.counts)),
            "total_count": float(self.counts.sum()),
            "weighting": self.weighting,
        }


def _count_matrix(token_lists, index):
    counts = np.zeros((len(index), len(token_lists)))
    dropped = 0
    for j, tokens in enumerate(token_lists):
        for term, c in Counter(tokens).items():
            i = index.get(term)
            if i is None:
                dropped += c
            else:
                counts[i, j] = c
    return counts, dropped


def build_bag_of_words(corpus, min_doc_freq=1, stopwords=DEFAULT_STOPWORDS,
                       doc_ids=None, labels=None):
    """Raw term counts with a lexicographically sorted vocabulary.

    Terms that occur in fewer than ``min_doc_freq`` documents are dropped.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    if min_doc_freq < 1:
        raise ValueError(f"min_doc_freq must be >= 1, got {min_doc_freq}")
    doc_ids = [str(i) for i in range(len(corpus))] if doc_ids is None else list(doc_ids)
    if len(doc_ids) != len(corpus):
        raise ValueError("doc_ids and corpus differ in length")
    tokens = [tokenize(doc, stopwords) for doc in corpus]
    df = Counter(term for doc in tokens for term in set(doc))
    vocabulary = sorted(t for t, c in df.items() if c >= min_doc_freq)
    if not vocabulary:
        raise ValueError(f"no terms left after preprocessing with min_doc_freq={min_doc_freq}")
    counts, _ = _count_matrix(tokens, {t: i for i, t in enumerate(vocabulary)})
    return BagOfWords(vocabulary, counts, doc_ids, None if labels is None else list(labels))


def vectorize(corpus, vocabulary, stopwords=DEFAULT_STOPWORDS, doc_ids=None, labels=None):
    """Count ``corpus`` against a fixed (training) vocabulary.

    Out-of-vocabulary terms are dropped with a warning, so the result always
    has one row per vocabulary term.
    """
    corpus = list(corpus)
    doc_ids = [str(i) for i in range(len(corpus))] if doc_ids is None else list(doc_ids)
    counts, dropped = _count_matrix([tokenize(d, stopwords) for d in corpus],
                                    {t: i for i, t in enumerate(vocabulary)})
    if dropped:
        warnings.warn(f"dropped {dropped} out-of-vocabulary token(s)", UserWarning, stacklevel=2)
    return BagOfWords(list(vocabulary), counts, doc_ids, None if labels is None else list(labels))


def inverse_document_frequency(counts):
    """``ln(n / df)`` per term; terms absent from every document get 0."""
    n = counts.shape[1]
    df = np.count_nonzero(counts, axis=1)
    idf = np.zeros(counts.shape[0])
    seen = df > 0
    idf[seen] = np.log(n / df[seen])
    return idf


def weight_matrix(bow, scheme, idf=None):
    """Weighted term-document matrix.

    ``binary`` is the indicator of a positive count. ``tfidf`` multiplies the
    raw count by ``ln(n / df)``, with ``idf`` overriding the weights computed
    from ``bow`` itself (use the training weights for held-out documents).
    """
    counts = bow.counts if isinstance(bow, BagOfWords) else np.asarray(bow, dtype=np.float64)
    if scheme == "binary":
        return (counts > 0).astype(np.float64)
    if scheme == "tfidf":
        idf = inverse_document_frequency(counts) if idf is None else np.asarray(idf)
        return counts * idf[:, None]
    raise ValueError(f"unknown weighting {scheme!r}; expected one of {WEIGHTINGS}")


def project_features(X, F):
    """Document features ``X^T F``, left signed."""
    if X.shape[0] != F.shape[0]:
        raise ValueError(f"vocabulary mismatch: X has {X.shape[0]} rows, F has {F.shape[0]}")
    return X.T @ F


@dataclass
class TopicSummary:
    topic: int
    positive: List[Tuple[str, float]] = field(default_factory=list)
    negative: List[Tuple[str, float]] = field(default_factory=list)
    m: int = 5

    @property
    def short(self):
        return len(self.positive) < self.m or len(self.negative) < self.m


def topic_summary(F, vocabulary, m=5, zero_tol=1e-10):
    """Top ``m`` positive and ``m`` most negative terms of each column of ``F``.

    Ties go to the lexicographically smaller term. Weights with magnitude at
    most ``zero_tol`` count as zero, so round-off never fills a list. A side
    with fewer than ``m`` signed entries comes back short and
    ``TopicSummary.short`` is set.
    """
    if F.shape[0] != len(vocabulary):
        raise ValueError(f"F has {F.shape[0]} rows but the vocabulary has {len(vocabulary)} terms")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    out = []
    for j in range(F.shape[1]):
        col = F[:, j]
        pos = sorted(((t, float(w)) for t, w in zip(vocabulary, col) if w > zero_tol),
                     key=lambda tw: (-tw[1], tw[0]))
        neg = sorted(((t, float(w)) for t, w in zip(vocabulary, col) if w < -zero_tol),
                     key=lambda tw: (tw[1], tw[0]))
        out.append(TopicSummary(j + 1, pos[:m], neg[:m], m))
    return out


def format_topics(summaries):
    """Tab-separated table with ``m`` rows per side; missing slots are flagged."""
    lines = ["topic\tside\trank\tterm\tweight\tflag"]
    for s in summaries:
        for side, terms in (("pos", s.positive), ("neg", s.negative)):
            for r in range(s.m):
                if r < len(terms):
                    t, w = terms[r]
                    lines.append(f"{s.topic}\t{side}\t{r + 1}\t{t}\t{w:.6g}\t")
                else:
                    lines.append(f"{s.topic}\t{side}\t{r + 1}\t\t\tshort")
    return "\n".join(lines) + "\n"


def read_corpus(path):
    """Read ``(documents, labels)`` from a text or CSV file.

    ``.csv`` files hold ``label,text`` rows (a ``label,text`` header is
    skipped); anything else is one document per non-blank line and has no
    labels.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        if str(path).lower().endswith(".csv"):
            rows = [r for r in csv.reader(fh) if r]
            if rows and [c.strip().lower() for c in rows[0]] == ["label", "text"]:
                rows = rows[1:]
            bad = [i for i, r in enumerate(rows) if len(r) != 2]
            if bad:
                raise ValueError(f"{path}: row {bad[0] + 1} does not have exactly 2 fields")
            return [r[1] for r in rows], [r[0] for r in rows]
        return [line.strip() for line in fh if line.strip()], None


def write_features(path, doc_ids, labels, G):
    """CSV with header ``doc_id,label,f1..fk``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["doc_id", "label"] + [f"f{j + 1}" for j in range(G.shape[1])])
        for i, row in enumerate(G):
            label = "" if labels is None else labels[i]
            w.writerow([doc_ids[i], label] + [repr(float(v)) for v in row])


def train_test_split(n, test_fraction, seed=None):
    """Sorted train and test index arrays from a seeded permutation."""
    if not 0 <= test_fraction < 1:
        raise ValueError(f"test fraction must lie in [0, 1), got {test_fraction}")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])
