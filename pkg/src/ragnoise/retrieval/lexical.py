"""BM25 inverted index: the lexical baseline retriever.

Scoring uses the nonnegative Lucene-style idf, ``ln(1 + (N - df + 0.5) / (df + 0.5))``,
with the usual tf saturation and length normalization.  Only documents sharing
at least one term with the query are candidates; ties break by ascending doc_id.
"""

from __future__ import annotations

import json
import math
import pickle
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ragnoise import kernels
from ragnoise.errors import InvalidInputError
from ragnoise.retrieval.corpus import Document, validate_corpus

_TOKEN = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass
class LexicalIndex:
    doc_ids: list[str]
    postings: dict[str, tuple[np.ndarray, np.ndarray]]  # term -> (doc index, tf) arrays
    idf: dict[str, float]
    norm: np.ndarray  # per-doc k1 * (1 - b + b * dl / avgdl)
    k1: float
    b: float
    n_docs: int
    avg_doc_len: float


def build_lexical_index(corpus: list[Document], k1: float = 1.2, b: float = 0.75) -> LexicalIndex:
    if not corpus:
        raise InvalidInputError("corpus must be nonempty")
    validate_corpus(corpus)
    corpus = sorted(corpus, key=lambda d: d.doc_id)  # postings end up ordered by doc_id
    doc_ids = [d.doc_id for d in corpus]
    doc_tokens = [tokenize(d.contents) for d in corpus]
    doc_lens = np.array([len(t) for t in doc_tokens], dtype=np.float64)
    avg_doc_len = float(doc_lens.mean())

    raw: dict[str, list[tuple[int, int]]] = {}
    for i, tokens in enumerate(doc_tokens):
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for t, c in counts.items():
            raw.setdefault(t, []).append((i, c))

    n = len(corpus)
    postings = {}
    idf = {}
    for term, pairs in raw.items():
        pairs.sort()  # ascending position == ascending doc_id after the corpus sort
        postings[term] = (
            np.array([p[0] for p in pairs], dtype=np.int64),
            np.array([p[1] for p in pairs], dtype=np.float64),
        )
        df = len(pairs)
        idf[term] = math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    norm = k1 * (1.0 - b + b * doc_lens / avg_doc_len)
    return LexicalIndex(doc_ids, postings, idf, norm, k1, b, n, avg_doc_len)


def lexical_search(index: LexicalIndex, query: str, k: int) -> list[tuple[str, float]]:
    """Top-k documents by BM25; descending score, ties by ascending doc_id."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    scores = np.zeros(index.n_docs, dtype=np.float64)
    touched = np.zeros(index.n_docs, dtype=bool)
    for term in tokenize(query):
        hit = index.postings.get(term)
        if hit is None:
            continue
        doc_idx, tf = hit
        kernels.bm25_accumulate(scores, doc_idx, tf, index.idf[term], index.k1, index.norm)
        touched[doc_idx] = True
    candidates = np.nonzero(touched)[0]
    if len(candidates) == 0:
        return []
    ranked = sorted(
        ((index.doc_ids[i], float(scores[i])) for i in candidates),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[:k]


def save_index(index: LexicalIndex, path: str | Path) -> None:
    meta = {"k1": index.k1, "b": index.b, "n_docs": index.n_docs,
            "avg_doc_len": index.avg_doc_len}
    with open(path, "wb") as fh:
        pickle.dump({"meta": json.dumps(meta), "doc_ids": index.doc_ids,
                     "postings": index.postings, "idf": index.idf, "norm": index.norm}, fh)


def load_index(path: str | Path) -> LexicalIndex:
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    meta = json.loads(blob["meta"])
    return LexicalIndex(
        doc_ids=blob["doc_ids"], postings=blob["postings"], idf=blob["idf"],
        norm=blob["norm"], k1=meta["k1"], b=meta["b"], n_docs=meta["n_docs"],
        avg_doc_len=meta["avg_doc_len"],
    )
