"""Contrastive training of the dense retriever.

Each batch pairs a (possibly corrupted) query with its positive document and
one hard negative.  The negative set of example i is its own hard negative
plus the positives of the other in-batch examples; the per-example loss is

    -log( exp(s(q_i, p_i)/tau) / (exp(s(q_i, p_i)/tau) + sum_j exp(s(q_i, n_j)/tau)) )

with cosine similarity s and temperature tau, averaged over the batch.
Gradients flow analytically through the L2 normalization into the weight
matrix; updates touch only the hashed-feature columns present in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ragnoise import kernels
from ragnoise.errors import InvalidInputError
from ragnoise.retrieval.corpus import Document
from ragnoise.retrieval.dense import CorpusEmbeddings, DenseModel, dense_search, project_batch
from ragnoise.rng import substream


@dataclass(frozen=True)
class ContrastiveBatch:
    """Queries with one positive and one hard-negative document text each."""

    queries: tuple[str, ...]
    positives: tuple[str, ...]
    negatives: tuple[str, ...]

    def validate(self) -> None:
        n = len(self.queries)
        if not (n == len(self.positives) == len(self.negatives)):
            raise InvalidInputError("batch fields must have equal length")
        if n < 2:
            raise InvalidInputError("batch size must be >= 2 so in-batch negatives exist")
        for i, (p, h) in enumerate(zip(self.positives, self.negatives)):
            if p == h:
                raise InvalidInputError(f"example {i}: positive equals hard negative")


def infonce(unit_q: np.ndarray, unit_pos: np.ndarray, unit_neg: np.ndarray,
            tau: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss, per-example losses and dL/dlogits for unit-norm embedding rows.

    Candidate j < B of example i is positive j (in-batch negatives for j != i);
    candidate B is example i's own hard negative.
    """
    if tau <= 0:
        raise InvalidInputError(f"temperature must be positive, got {tau}")
    b = unit_q.shape[0]
    logits = np.empty((b, b + 1), dtype=np.float64)
    logits[:, :b] = (unit_q @ unit_pos.T) / tau
    logits[:, b] = np.sum(unit_q * unit_neg, axis=1) / tau
    peak = logits.max(axis=1, keepdims=True)
    lse = peak[:, 0] + np.log(np.exp(logits - peak).sum(axis=1))
    diag = logits[np.arange(b), np.arange(b)]
    losses = lse - diag
    grad_logits = np.exp(logits - lse[:, None])
    grad_logits[np.arange(b), np.arange(b)] -= 1.0
    grad_logits /= b
    return float(losses.mean()), losses, grad_logits


def _forward_backward(model: DenseModel, batch: ContrastiveBatch):
    """Loss plus per-text raw-projection gradients and sparse features."""
    batch.validate()
    model.validate()
    b = len(batch.queries)
    texts = list(batch.queries) + list(batch.positives) + list(batch.negatives)
    raw, feats = project_batch(model, texts)
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInputError("zero-norm projection in batch; cannot normalize")
    unit = raw / norms[:, None]
    uq, up, un = unit[:b], unit[b : 2 * b], unit[2 * b :]

    loss, _, g = infonce(uq, up, un, model.tau)
    g = g / model.tau
    d_unit = np.empty_like(unit)
    d_unit[:b] = g[:, :b] @ up + g[:, b:] * un
    d_unit[b : 2 * b] = g[:, :b].T @ uq
    d_unit[2 * b :] = g[:, b:] * uq
    # back through e = u / |u|
    inner = np.sum(unit * d_unit, axis=1, keepdims=True)
    d_raw = (d_unit - inner * unit) / norms[:, None]
    return loss, d_raw, feats


def _sparse_grad(d_raw: np.ndarray, feats) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate per-text outer products into (touched columns, column gradients)."""
    cols = np.concatenate([idx for idx, _ in feats])
    vecs = np.concatenate(
        [vals[:, None] * d_raw[t][None, :] for t, (idx, vals) in enumerate(feats)]
    )
    uniq, inverse = np.unique(cols, return_inverse=True)
    block = np.zeros((len(uniq), d_raw.shape[1]), dtype=np.float64)
    kernels.scatter_outer(block, inverse.astype(np.int64), vecs)
    return uniq, block


def contrastive_loss(model: DenseModel, batch: ContrastiveBatch) -> tuple[float, np.ndarray]:
    """Batch loss and the dense gradient w.r.t. the weight matrix."""
    loss, d_raw, feats = _forward_backward(model, batch)
    grad = np.zeros_like(model.weights)
    cols, block = _sparse_grad(d_raw, feats)
    grad[:, cols] += block.T
    return loss, grad


@dataclass(frozen=True)
class TrainExample:
    query: str
    positive: str
    negative: str


@dataclass
class TrainConfig:
    """Mini-batch gradient descent settings (defaults follow the benchmark protocol)."""

    lr: float = 2e-5
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.lr < 0:
            raise InvalidInputError("lr must be >= 0")
        if self.batch_size < 2:
            raise InvalidInputError("batch_size must be >= 2")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")


def train_retriever(model: DenseModel, examples: list[TrainExample],
                    config: TrainConfig) -> tuple[DenseModel, list[float]]:
    """Train a copy of the model; returns it with the per-step loss curve.

    Example order is reshuffled each epoch from the seed; trailing batches of
    size < 2 are skipped (no in-batch negatives).  Training is sequential so a
    fixed seed reproduces the exact weight trajectory.
    """
    if not examples:
        raise InvalidInputError("training set must be nonempty")
    config.validate()
    trained = DenseModel(
        weights=model.weights.copy(), tau=model.tau,
        n_min=model.n_min, n_max=model.n_max, version=model.version,
    )
    curve: list[float] = []
    for epoch in range(config.epochs):
        order = list(range(len(examples)))
        substream(config.seed, "epoch", epoch).shuffle(order)
        for start in range(0, len(order), config.batch_size):
            chunk = [examples[i] for i in order[start : start + config.batch_size]]
            if len(chunk) < 2:
                continue
            batch = ContrastiveBatch(
                queries=tuple(e.query for e in chunk),
                positives=tuple(e.positive for e in chunk),
                negatives=tuple(e.negative for e in chunk),
            )
            loss, d_raw, feats = _forward_backward(trained, batch)
            curve.append(loss)
            if config.lr != 0.0:
                cols, block = _sparse_grad(d_raw, feats)
                trained.weights[:, cols] -= config.lr * block.T
    return trained, curve


def build_training_set(records, corpus: list[Document], positives: dict[str, str],
                       seed: int) -> list[TrainExample]:
    """Pair each record with its positive doc text and a random hard negative.

    Hard negatives are drawn uniformly from the non-positive documents, one
    seeded substream per query id.
    """
    by_id = {d.doc_id: d for d in corpus}
    examples = []
    for r in records:
        pos_id = positives.get(r.id)
        if pos_id is None:
            continue
        if pos_id not in by_id:
            raise InvalidInputError(f"positive doc {pos_id!r} for query {r.id!r} not in corpus")
        rng = substream(seed, "hardneg", r.id)
        neg_id = pos_id
        while neg_id == pos_id:
            neg_id = corpus[rng.below(len(corpus))].doc_id
        examples.append(
            TrainExample(query=r.question, positive=by_id[pos_id].contents,
                         negative=by_id[neg_id].contents)
        )
    if not examples:
        raise InvalidInputError("no training examples could be built (no positives matched)")
    return examples


def evaluate_recall(model: DenseModel, emb: CorpusEmbeddings, records,
                    positives: dict[str, str], k: int) -> dict:
    """Recall@k overall and split by the records' corrupted flag."""
    hits = {"overall": [0, 0], "corrupted": [0, 0], "clean": [0, 0]}
    for r in records:
        pos_id = positives.get(r.id)
        if pos_id is None:
            continue
        got = {doc_id for doc_id, _ in dense_search(model, emb, r.question, k)}
        hit = int(pos_id in got)
        subset = "corrupted" if r.corruption is not None else "clean"
        for key in ("overall", subset):
            hits[key][0] += hit
            hits[key][1] += 1
    return {
        key: (count / total if total else 0.0)
        for key, (count, total) in hits.items()
    } | {f"n_{key}": total for key, (_, total) in hits.items()}
