"""Shared fixtures. Heavy artifacts (synthetic world, trained model) are session-scoped."""

from __future__ import annotations

import pytest

from ragnoise.genclient import StubGenerator
from ragnoise.retrieval import (
    TrainConfig,
    build_lexical_index,
    create_model,
    embed_corpus,
    train_retriever,
)
from ragnoise.synthetic import build_world, corrupted_eval_set, training_examples
from ragnoise.tables import default_tables
from ragnoise.textnoise import CorruptionSpec

# The synthetic experiment protocol: every seed and hyperparameter pinned here.
WORLD_SEED = 11
EVAL_SEED = 23
TRAIN_SEED = 31
MODEL_SEED = 5
SHUFFLE_SEED = 7
DENSE_DIM = 64
DENSE_BUCKETS = 2**15
TRAIN_TAU = 0.5
TRAIN_LR = 1.0
TRAIN_BATCH = 16
TRAIN_EPOCHS = 8


@pytest.fixture(scope="session")
def tables():
    return default_tables()


@pytest.fixture(scope="session")
def world():
    return build_world(seed=WORLD_SEED)


@pytest.fixture(scope="session")
def lexical_index(world):
    return build_lexical_index(world.corpus)


@pytest.fixture(scope="session")
def eval_records(world):
    records, _ = corrupted_eval_set(world, 0.2, seed=EVAL_SEED)
    return records


@pytest.fixture(scope="session")
def stub_generator(eval_records):
    return StubGenerator({r.id: list(r.golden_answers) for r in eval_records})


@pytest.fixture(scope="session")
def untrained_model():
    return create_model(seed=MODEL_SEED, dim=DENSE_DIM, n_buckets=DENSE_BUCKETS, tau=TRAIN_TAU)


@pytest.fixture(scope="session")
def trained_model(world, untrained_model):
    examples = training_examples(world, 0.2, seed=TRAIN_SEED)
    trained, curve = train_retriever(
        untrained_model, examples,
        TrainConfig(lr=TRAIN_LR, batch_size=TRAIN_BATCH, epochs=TRAIN_EPOCHS, seed=SHUFFLE_SEED),
    )
    assert curve, "training must record a loss curve"
    return trained


@pytest.fixture(scope="session")
def untrained_embeddings(untrained_model, world):
    return embed_corpus(untrained_model, world.corpus)


@pytest.fixture(scope="session")
def trained_embeddings(trained_model, world):
    return embed_corpus(trained_model, world.corpus)


@pytest.fixture()
def spelling_spec():
    return CorruptionSpec(seed=11)


def make_clean_records(n: int):
    """Deterministic English-ish QA records for quota tests."""
    from ragnoise.datakit import QueryRecord

    topics = ["science", "history", "geography", "music", "sports"]
    return [
        QueryRecord(
            id=f"r{i:04d}",
            question=f"what is the famous answer to question number {i} about {topics[i % 5]}",
            golden_answers=(f"answer{i}",),
        )
        for i in range(n)
    ]
