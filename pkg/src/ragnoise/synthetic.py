"""Deterministic synthetic corpus + query sets for the robustness experiments.

The world is organized in groups.  Each group has:

* ``group_size`` profile docs, one per entity -- the positives.  A profile doc
  mentions its own entity three times, lists every sibling entity once, and
  carries the group anchor, a per-entity relation word, and the answer word;
* ``n_hubs`` directory docs carrying the anchor twice, every entity once and
  every relation word once (no answers);
* one variant doc that mirrors the last member's profile with a different
  answer, and sorts before it.

Queries read "<relation> of <entity> in <anchor>".  By construction a clean
query ranks its profile doc first (triple entity occurrence), but once the
entity word is corrupted the directory docs win on the anchor/relation terms
and push the positive below rank 3 -- retrieval degrades under corruption for
every group member.  The directory docs still contain all true entity words,
so a corrector grounded in the top retrieved docs can restore the query.

All content words are unique pseudo-words disjoint from the bundled base
lexicon; gold answers occur only in the positive doc.
"""

from __future__ import annotations

from dataclasses import dataclass

from ragnoise.datakit import DatasetManifest, QueryRecord, corrupt_dataset
from ragnoise.retrieval.corpus import Document
from ragnoise.retrieval.train import TrainExample, build_training_set
from ragnoise.rng import SeededRng, substream
from ragnoise.tables import load_base_lexicon
from ragnoise.textnoise import CorruptionSpec

_CONSONANTS = "bcdfgklmnprstvz"
_VOWELS = "aeiou"


class _Vocab:
    """Unique pseudo-word factory (CVCV syllables), disjoint from the base lexicon."""

    def __init__(self, rng: SeededRng, reserved: frozenset[str]):
        self._rng = rng
        self._used: set[str] = set()
        self._reserved = reserved

    def word(self, syllables: int = 3) -> str:
        while True:
            w = "".join(
                _CONSONANTS[self._rng.below(len(_CONSONANTS))]
                + _VOWELS[self._rng.below(len(_VOWELS))]
                for _ in range(syllables)
            )
            if w not in self._used and w not in self._reserved:
                self._used.add(w)
                return w


@dataclass
class SyntheticWorld:
    corpus: list[Document]
    queries: list[QueryRecord]  # clean
    positives: dict[str, str]  # query id -> positive doc id
    n_groups: int
    group_size: int


def build_world(seed: int = 11, n_groups: int = 17, group_size: int = 6,
                n_hubs: int = 3, n_distractors: int = 30,
                n_queries: int = 100) -> SyntheticWorld:
    vocab = _Vocab(substream(seed, "vocab"), load_base_lexicon())
    corpus: list[Document] = []
    queries: list[QueryRecord] = []
    positives: dict[str, str] = {}

    for g in range(n_groups):
        anchor = vocab.word()
        entities = [vocab.word() for _ in range(group_size)]
        relations = [vocab.word() for _ in range(group_size)]

        for m in range(group_size):
            answer = vocab.word()
            tokens = (
                [entities[m], "alias", entities[m], "profile"] + entities
                + ["topic", relations[m], "region", anchor, "fact", answer,
                   "note", vocab.word(), vocab.word()]
            )
            doc_id = f"d{g:02d}m{m}"
            corpus.append(Document(doc_id, " ".join(tokens)))
            qid = f"q{g:02d}{m}"
            queries.append(QueryRecord(
                id=qid,
                question=f"{relations[m]} of {entities[m]} in {anchor}",
                golden_answers=(answer,),
            ))
            positives[qid] = doc_id
            if m == group_size - 1:
                # variant doc: same term profile, different answer, sorts first
                shadow = (
                    [entities[m], "alias", entities[m], "profile"] + entities
                    + ["topic", relations[m], "region", anchor, "fact", vocab.word(),
                       "note", vocab.word(), vocab.word()]
                )
                corpus.append(Document(f"d{g:02d}b{m}", " ".join(shadow)))

        for h in range(n_hubs):
            tokens = (
                [anchor, "area", anchor, "profile"] + entities
                + ["topic"] + relations + ["note", vocab.word()]
            )
            corpus.append(Document(f"d{g:02d}a{h}", " ".join(tokens)))

    for d in range(n_distractors):
        tokens = (
            [vocab.word(), "alias", vocab.word(), "profile"]
            + [vocab.word() for _ in range(6)]
            + ["topic", vocab.word(), "region", vocab.word(), "fact", vocab.word(),
               "note", vocab.word(), vocab.word()]
        )
        corpus.append(Document(f"x{d:03d}", " ".join(tokens)))

    corpus.sort(key=lambda doc: doc.doc_id)
    queries = queries[:n_queries]
    positives = {q.id: positives[q.id] for q in queries}
    return SyntheticWorld(
        corpus=corpus, queries=queries, positives=positives,
        n_groups=n_groups, group_size=group_size,
    )


def corrupted_eval_set(world: SyntheticWorld, rate: float,
                       seed: int) -> tuple[list[QueryRecord], DatasetManifest]:
    """World queries corrupted at the given exact rate."""
    spec = CorruptionSpec(seed=seed)
    return corrupt_dataset(world.queries, rate, spec, name=f"synthetic-{rate:g}")


def training_examples(world: SyntheticWorld, rate: float, seed: int) -> list[TrainExample]:
    """Contrastive training triples: every clean query plus its corrupted variant.

    Pairs come in both the (query, answer doc) and (corrupted query, answer doc)
    forms so training aligns corrupted surface forms with the same positives.
    """
    records, _ = corrupt_dataset(world.queries, rate, CorruptionSpec(seed=seed),
                                 name="synthetic-train")
    both = list(world.queries) + [r for r in records if r.corruption is not None]
    return build_training_set(both, world.corpus, world.positives, seed=seed)
