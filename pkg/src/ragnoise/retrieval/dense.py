"""Trainable dense retriever: hashed character n-gram features, linear projection.

Texts are lowercased, each whitespace token is wrapped in boundary markers,
and all character n-grams (default 3- and 4-grams) are hashed into ``n_buckets``
count features.  A weight matrix projects the sparse counts to ``dim``
dimensions; embeddings are L2-normalized so cosine similarity is a dot product.
Character n-grams make the encoder inherently sensitive to character-level
query corruption, which is what the contrastive trainer exploits.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ragnoise import kernels
from ragnoise.errors import InvalidInputError, ModelMismatchError, ValidationError
from ragnoise.retrieval.corpus import Document

_BOUNDARY = 1  # token boundary marker codepoint (never a real character)


def _text_codes(text: str) -> np.ndarray:
    """Codepoint array with boundary markers around tokens and 0 separators."""
    parts = []
    for token in text.lower().split():
        parts.append(_BOUNDARY)
        parts.extend(ord(c) for c in token)
        parts.append(_BOUNDARY)
        parts.append(0)
    return np.array(parts[:-1] if parts else [], dtype=np.uint64)


def featurize(text: str, n_min: int, n_max: int, n_buckets: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (bucket indices, counts) of the text's hashed character n-grams."""
    codes = _text_codes(text)
    buckets = kernels.hash_ngram_buckets(codes, n_min, n_max, n_buckets)
    if len(buckets) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    idx, counts = np.unique(buckets, return_counts=True)
    return idx, counts.astype(np.float64)


@dataclass
class DenseModel:
    """Feature-hashing embedding model with temperature for the contrastive loss."""

    weights: np.ndarray  # (dim, n_buckets) float64
    tau: float = 0.05
    n_min: int = 3
    n_max: int = 4
    version: int = 1

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def n_buckets(self) -> int:
        return self.weights.shape[1]

    def validate(self) -> None:
        if self.tau <= 0:
            raise InvalidInputError(f"temperature must be positive, got {self.tau}")
        if self.weights.ndim != 2:
            raise InvalidInputError("weights must be a (dim, n_buckets) matrix")

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.weights).tobytes())
        h.update(json.dumps([self.tau, self.n_min, self.n_max, self.version]).encode())
        return h.hexdigest()[:16]

    def featurize(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        return featurize(text, self.n_min, self.n_max, self.n_buckets)


def create_model(seed: int, dim: int = 128, n_buckets: int = 2**18, tau: float = 0.05,
                 n_min: int = 3, n_max: int = 4) -> DenseModel:
    """Random-normal init scaled by 1/sqrt(dim), seeded via PCG64."""
    rng = np.random.Generator(np.random.PCG64(seed))
    weights = rng.standard_normal((dim, n_buckets)) / np.sqrt(dim)
    model = DenseModel(weights=weights, tau=tau, n_min=n_min, n_max=n_max)
    model.validate()
    return model


def embed_batch(model: DenseModel, texts: list[str]) -> np.ndarray:
    """L2-normalized embeddings, one row per text."""
    raw, _ = project_batch(model, texts)
    norms = np.linalg.norm(raw, axis=1)
    bad = np.nonzero(norms == 0.0)[0]
    if len(bad):
        raise InvalidInputError(
            f"text {bad[0]} has a zero-norm projection (empty text or degenerate weights)"
        )
    return raw / norms[:, None]


def project_batch(model: DenseModel, texts: list[str]):
    """Raw (un-normalized) projections plus the per-text sparse features."""
    feats = []
    idx_parts, val_parts, offsets = [], [], [0]
    for t in texts:
        if not t or not t.strip():
            raise InvalidInputError("cannot embed empty text")
        idx, vals = model.featurize(t)
        feats.append((idx, vals))
        idx_parts.append(idx)
        val_parts.append(vals)
        offsets.append(offsets[-1] + len(idx))
    idx_all = np.concatenate(idx_parts) if idx_parts else np.empty(0, dtype=np.int64)
    val_all = np.concatenate(val_parts) if val_parts else np.empty(0, dtype=np.float64)
    raw = kernels.project_segments(model.weights, idx_all, val_all,
                                   np.array(offsets, dtype=np.int64))
    return raw, feats


def embed(model: DenseModel, text: str) -> np.ndarray:
    """Unit-norm embedding of one text."""
    return embed_batch(model, [text])[0]


@dataclass
class CorpusEmbeddings:
    doc_ids: list[str]
    matrix: np.ndarray  # (n_docs, dim), rows unit-norm
    model_fingerprint: str


def embed_corpus(model: DenseModel, corpus: list[Document]) -> CorpusEmbeddings:
    matrix = embed_batch(model, [d.contents for d in corpus])
    return CorpusEmbeddings(
        doc_ids=[d.doc_id for d in corpus],
        matrix=matrix,
        model_fingerprint=model.fingerprint(),
    )


def dense_search(model: DenseModel, emb: CorpusEmbeddings, query: str,
                 k: int) -> list[tuple[str, float]]:
    """Exact brute-force top-k by cosine; ties broken by ascending doc_id."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if emb.model_fingerprint != model.fingerprint():
        raise ModelMismatchError(
            "corpus embeddings were built with a different model "
            f"({emb.model_fingerprint} != {model.fingerprint()})"
        )
    q = embed(model, query)
    scores = emb.matrix @ q
    ranked = sorted(
        zip(emb.doc_ids, scores.tolist()),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return [(doc_id, float(s)) for doc_id, s in ranked[:k]]


def save_model(model: DenseModel, path: str | Path) -> None:
    """Versioned dump of weights + config with a payload checksum."""
    model.validate()
    payload = np.ascontiguousarray(model.weights).tobytes()
    header = {
        "format": "ragnoise-dense-model",
        "version": model.version,
        "dim": model.dim,
        "n_buckets": model.n_buckets,
        "tau": model.tau,
        "n_min": model.n_min,
        "n_max": model.n_max,
        "dtype": str(model.weights.dtype),
        "checksum": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(len(head).to_bytes(8, "little"))
        fh.write(head)
        fh.write(zlib.compress(payload, level=1))


def load_model(path: str | Path) -> DenseModel:
    with open(path, "rb") as fh:
        head_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(head_len).decode("utf-8"))
        payload = zlib.decompress(fh.read())
    if header.get("format") != "ragnoise-dense-model":
        raise ValidationError(f"{path} is not a dense model file")
    if hashlib.sha256(payload).hexdigest() != header["checksum"]:
        raise ValidationError(f"model file {path} failed its checksum")
    weights = np.frombuffer(payload, dtype=header["dtype"]).reshape(
        header["dim"], header["n_buckets"]
    ).copy()
    model = DenseModel(
        weights=weights, tau=header["tau"], n_min=header["n_min"],
        n_max=header["n_max"], version=header["version"],
    )
    model.validate()
    return model
