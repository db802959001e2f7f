"""Contrastive objective: closed forms, analytic gradient vs finite differences."""

import math

import numpy as np
import pytest

from ragnoise.errors import InvalidInputError
from ragnoise.retrieval import (
    ContrastiveBatch,
    TrainConfig,
    TrainExample,
    contrastive_loss,
    create_model,
    infonce,
    train_retriever,
)
from ragnoise.rng import SeededRng


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestClosedForms:
    def test_equal_similarities_single_negative_gives_ln2(self):
        q = np.array([unit([1.0, 0.0])])
        p = np.array([unit([1.0, 0.0])])
        h = np.array([unit([1.0, 0.0])])  # sim to positive == sim to negative
        loss, _, _ = infonce(q, p, h, tau=0.7)
        assert abs(loss - math.log(2)) < 1e-9

    @pytest.mark.parametrize("b", [2, 4, 8])
    def test_equal_similarities_m_negatives_gives_ln_1_plus_m(self, b):
        # all embeddings identical: every candidate similarity is 1, M = b negatives
        row = unit([0.3, -0.4, 0.5])
        q = np.tile(row, (b, 1))
        loss, per_example, _ = infonce(q, q.copy(), q.copy(), tau=0.05)
        assert abs(loss - math.log(1 + b)) < 1e-9
        assert np.allclose(per_example, math.log(1 + b), atol=1e-9)

    def test_scalar_formula_point(self):
        # sim+ = 1, single negative sim- = 0, tau = 1 -> ln(1 + e^-1)
        q = np.array([[1.0, 0.0]])
        p = np.array([[1.0, 0.0]])
        h = np.array([[0.0, 1.0]])
        loss, _, _ = infonce(q, p, h, tau=1.0)
        assert abs(loss - math.log(1 + math.exp(-1))) < 1e-9

    def test_positive_temperature_required(self):
        q = np.array([[1.0, 0.0]])
        with pytest.raises(InvalidInputError):
            infonce(q, q, q, tau=0.0)


class TestLossProperties:
    def test_positivity_with_negatives(self):
        rng = np.random.Generator(np.random.PCG64(0))
        for _ in range(20):
            q = np.array([unit(rng.standard_normal(4)) for _ in range(3)])
            p = np.array([unit(rng.standard_normal(4)) for _ in range(3)])
            h = np.array([unit(rng.standard_normal(4)) for _ in range(3)])
            loss, _, _ = infonce(q, p, h, tau=0.3)
            assert loss > 0.0

    def test_monotone_decreasing_in_positive_similarity(self):
        h = np.array([[0.0, 1.0]])
        losses = []
        for angle in (1.2, 0.8, 0.4, 0.1):
            q = np.array([[1.0, 0.0]])
            p = np.array([[math.cos(angle), math.sin(angle)]])
            loss, _, _ = infonce(q, p, h, tau=0.5)
            losses.append(loss)
        assert losses == sorted(losses, reverse=True)  # sim+ up -> loss strictly down

    def test_temperature_sharpens_margins(self):
        # strict-margin positive: small tau drives loss to zero
        q = np.array([[1.0, 0.0]])
        p = np.array([[1.0, 0.0]])
        h = np.array([unit([1.0, 1.0])])
        loss_half, _, _ = infonce(q, p, h, tau=0.5)
        loss_sharp, _, _ = infonce(q, p, h, tau=0.05)
        assert loss_sharp < loss_half
        # strict-margin negative: small tau blows the loss up
        loss_bad_half, _, _ = infonce(q, h, p.copy(), tau=0.5)
        loss_bad_sharp, _, _ = infonce(q, h, np.array([[1.0, 0.0]]), tau=0.05)
        assert loss_bad_sharp > loss_bad_half


def random_batch(rng: SeededRng, size: int) -> ContrastiveBatch:
    vocab = ["alpha", "bravo", "carbon", "delta", "echo", "fulcrum", "gamma", "hotel"]
    def text():
        return " ".join(rng.choice(vocab) for _ in range(1 + rng.below(3)))
    queries, positives, negatives = [], [], []
    for _ in range(size):
        queries.append(text())
        pos = text()
        neg = text()
        while neg == pos:
            neg = text() + " extra"
        positives.append(pos)
        negatives.append(neg)
    return ContrastiveBatch(tuple(queries), tuple(positives), tuple(negatives))


class TestGradient:
    def test_batch_validation(self):
        model = create_model(seed=0, dim=8, n_buckets=64)
        with pytest.raises(InvalidInputError):
            contrastive_loss(model, ContrastiveBatch(("q",), ("p",), ("n",)))
        with pytest.raises(InvalidInputError):
            ContrastiveBatch(("a", "b"), ("p", "p2"), ("p", "x")).validate()

    def test_untouched_columns_have_zero_gradient(self):
        model = create_model(seed=1, dim=8, n_buckets=64)
        rng = SeededRng(3)
        batch = random_batch(rng, 3)
        _, grad = contrastive_loss(model, batch)
        touched = set()
        for t in batch.queries + batch.positives + batch.negatives:
            idx, _ = model.featurize(t)
            touched.update(idx.tolist())
        untouched = sorted(set(range(64)) - touched)
        assert np.all(grad[:, untouched] == 0.0)

    def test_matches_central_finite_differences_100_models(self):
        eps = 1e-4
        rng = SeededRng(2024)
        worst = 0.0
        for trial in range(100):
            model = create_model(seed=trial, dim=8, n_buckets=64)
            batch = random_batch(rng, 2 + rng.below(3))
            loss, grad = contrastive_loss(model, batch)
            touched = sorted({
                int(i)
                for t in batch.queries + batch.positives + batch.negatives
                for i in model.featurize(t)[0]
            })
            coords = [(rng.below(8), touched[rng.below(len(touched))]) for _ in range(12)]
            analytic = np.array([grad[r, c] for r, c in coords])
            numeric = np.empty(len(coords))
            for j, (r, c) in enumerate(coords):
                orig = model.weights[r, c]
                model.weights[r, c] = orig + eps
                up, _ = contrastive_loss(model, batch)
                model.weights[r, c] = orig - eps
                down, _ = contrastive_loss(model, batch)
                model.weights[r, c] = orig
                numeric[j] = (up - down) / (2 * eps)
            denom = max(np.linalg.norm(numeric), 1e-12)
            rel = np.linalg.norm(analytic - numeric) / denom
            worst = max(worst, rel)
        assert worst <= 1e-4, f"worst relative gradient error {worst}"


class TestTraining:
    def _separable_examples(self):
        return [
            TrainExample("red apple fruit", "apple orchard fruit basket", "engine piston oil"),
            TrainExample("green pear fruit", "pear orchard fruit crate", "gearbox clutch oil"),
            TrainExample("car engine motor", "engine piston oil manual", "apple orchard fruit basket"),
            TrainExample("truck gearbox motor", "gearbox clutch oil manual", "pear orchard fruit crate"),
        ]

    def test_loss_decreases_on_separable_data(self):
        model = create_model(seed=6, dim=16, n_buckets=2**10, tau=0.5)
        _, curve = train_retriever(
            model, self._separable_examples(),
            TrainConfig(lr=0.5, batch_size=4, epochs=6, seed=3),
        )
        assert curve[-1] < curve[0]

    def test_zero_learning_rate_keeps_weights(self):
        model = create_model(seed=6, dim=16, n_buckets=2**10)
        trained, curve = train_retriever(
            model, self._separable_examples(),
            TrainConfig(lr=0.0, batch_size=4, epochs=2, seed=3),
        )
        assert np.array_equal(trained.weights, model.weights)
        assert len(curve) == 2

    def test_training_is_deterministic(self):
        model = create_model(seed=6, dim=16, n_buckets=2**10)
        config = TrainConfig(lr=0.3, batch_size=2, epochs=2, seed=9)
        t1, c1 = train_retriever(model, self._separable_examples(), config)
        t2, c2 = train_retriever(model, self._separable_examples(), config)
        assert c1 == c2
        assert np.array_equal(t1.weights, t2.weights)

    def test_original_model_not_mutated(self):
        model = create_model(seed=6, dim=16, n_buckets=2**10)
        before = model.weights.copy()
        train_retriever(model, self._separable_examples(),
                        TrainConfig(lr=0.5, batch_size=4, epochs=1, seed=0))
        assert np.array_equal(model.weights, before)

    def test_undersized_trailing_batch_skipped(self):
        model = create_model(seed=6, dim=16, n_buckets=2**10)
        examples = self._separable_examples()[:3]
        _, curve = train_retriever(model, examples,
                                   TrainConfig(lr=0.1, batch_size=2, epochs=1, seed=0))
        assert len(curve) == 1  # 2 full + 1 leftover -> one usable batch

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            TrainConfig(lr=-1).validate()
        with pytest.raises(InvalidInputError):
            TrainConfig(batch_size=1).validate()
        with pytest.raises(InvalidInputError):
            TrainConfig(epochs=0).validate()
