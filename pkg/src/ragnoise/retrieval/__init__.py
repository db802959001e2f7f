"""Retrievers: BM25 lexical baseline and the trainable dense model."""

from ragnoise.retrieval.corpus import Document, load_corpus, save_corpus
from ragnoise.retrieval.dense import (
    CorpusEmbeddings,
    DenseModel,
    create_model,
    dense_search,
    embed,
    embed_batch,
    embed_corpus,
    load_model,
    save_model,
)
from ragnoise.retrieval.lexical import (
    LexicalIndex,
    build_lexical_index,
    lexical_search,
    load_index,
    save_index,
)
from ragnoise.retrieval.train import (
    ContrastiveBatch,
    TrainConfig,
    TrainExample,
    build_training_set,
    contrastive_loss,
    evaluate_recall,
    infonce,
    train_retriever,
)


class LexicalRetriever:
    """Search adapter over a BM25 index."""

    kind = "lexical"

    def __init__(self, index: LexicalIndex):
        self.index = index

    def search(self, query: str, k: int) -> list[tuple[str, float]]:
        return lexical_search(self.index, query, k)


class DenseRetriever:
    """Search adapter over a dense model plus precomputed corpus embeddings."""

    kind = "dense"

    def __init__(self, model: DenseModel, embeddings: CorpusEmbeddings):
        self.model = model
        self.embeddings = embeddings

    def search(self, query: str, k: int) -> list[tuple[str, float]]:
        return dense_search(self.model, self.embeddings, query, k)
