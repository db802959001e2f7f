"""ragnoise: build and evaluate RAG benchmarks with typo-corrupted queries.

Modules
-------
textnoise   deterministic injection of spelling / keyboard / visual errors
datakit     dataset model, exact-rate corruption orchestration, stats, IO
evalkit     EM / token-level F1 / Acc with corrupted-vs-clean aggregation
retrieval   BM25 baseline and the contrastively trained dense retriever
correction  retrieval-grounded noisy-channel query correction
pipelines   standard / robust-retriever / correct-then-retrieve RAG runners
cli         the ``ragnoise`` command-line tool
"""

__version__ = "0.1.0"
