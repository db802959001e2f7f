"""Composable RAG pipelines and the four-arm corrupted-query experiment.

Three pipeline flavors share one per-query engine:

* standard  -- retrieve with the question as given, then generate;
* qer       -- identical, but the retriever is the contrastively trained dense
  model (configured by the caller; the runner itself is retriever-agnostic);
* ra-qcg    -- retrieve, correct the query with the retrieved evidence,
  retrieve again with the corrected query, generate.

The quadrant runner evaluates corrupted records under all four combinations of
{corrupted, original} query for generation x {corrupted, original} query for
retrieval; clean records are skipped there.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable

from ragnoise import evalkit
from ragnoise.correction import CorrectionContext, CorrectionResult, correct_query, \
    correct_query_external
from ragnoise.datakit import QueryRecord
from ragnoise.errors import InvalidInputError
from ragnoise.retrieval.corpus import Document

logger = logging.getLogger(__name__)


def load_prompt(name: str) -> str:
    return resources.files("ragnoise").joinpath("data", "prompts", name).read_text("utf-8")


class QuadrantCase(str, Enum):
    QE_DE = "QE-DE"  # corrupted query, docs retrieved via the corrupted query
    QE_DC = "QE-DC"  # corrupted query, docs retrieved via the original query
    QC_DE = "QC-DE"  # original query, docs retrieved via the corrupted query
    QC_DC = "QC-DC"  # original query, docs retrieved via the original query


@dataclass
class Hooks:
    """Extension points for wrapper methods; identity by default.

    ``pre_retrieval`` rewrites the retrieval query, ``post_retrieval`` reranks
    or filters hits, ``iterations`` re-retrieves with the previous answer
    appended to the query (iterate-N style).
    """

    pre_retrieval: Callable[[str], str] | None = None
    post_retrieval: Callable[[list], list] | None = None
    iterations: int = 1


@dataclass
class GroundedCorrector:
    """Noisy-channel corrector bound to its guard lexicon and channel costs."""

    base_lexicon: frozenset[str] | None = None
    max_edit_distance: float = 2.0
    lm_weight: float = 0.3

    kind = "grounded"

    def correct(self, query: str, docs: list[Document]) -> CorrectionResult:
        return correct_query(CorrectionContext(
            query=query, retrieved_docs=docs, base_lexicon=self.base_lexicon,
            lm_weight=self.lm_weight, max_edit_distance=self.max_edit_distance,
        ))


@dataclass
class ExternalCorrector:
    """Prompt-based correction through a generation endpoint (fail-open)."""

    client: object
    prompt_template: str = ""

    kind = "external"

    def correct(self, query: str, docs: list[Document]) -> CorrectionResult:
        template = self.prompt_template or load_prompt("correction.txt")
        return correct_query_external(
            CorrectionContext(query=query, retrieved_docs=docs),
            self.client, template,
        )


@dataclass
class PipelineConfig:
    """One pipeline wiring: retriever + optional corrector + generator."""

    retriever: object  # anything with .search(query, k) -> [(doc_id, score)]
    generator: object  # anything with .generate(query, docs, record_id) -> str
    corrector: object | None = None  # anything with .correct(query, docs)
    k_docs: int = 3
    requery_after_correction: bool = True
    max_input_units: int = 4096
    workers: int = 1
    hooks: Hooks = field(default_factory=Hooks)

    def validate(self) -> None:
        if self.k_docs < 1:
            raise InvalidInputError("k_docs must be >= 1")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")
        if self.max_input_units < 1:
            raise InvalidInputError("max_input_units must be >= 1")


@dataclass
class RunRecord:
    """Replayable trace of one query through a pipeline."""

    id: str
    query_used: str
    retrieved: list[tuple[str, float]]
    answer: str
    em: int
    f1: float
    acc: int
    corrupted: bool
    corrected_query: str | None = None
    first_retrieval: list[tuple[str, float]] | None = None
    failed: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "query_used": self.query_used,
            "retrieved": [[d, s] for d, s in self.retrieved],
            "answer": self.answer,
            "em": self.em,
            "f1": self.f1,
            "acc": self.acc,
            "corrupted": self.corrupted,
            "corrected_query": self.corrected_query,
            "first_retrieval": None if self.first_retrieval is None
            else [[d, s] for d, s in self.first_retrieval],
            "failed": self.failed,
            "error": self.error,
        }


def _truncate_docs(query: str, docs: list[Document], max_units: int) -> list[Document]:
    """Drop documents tail-first until the doc+query token budget fits."""
    budget = max_units - len(query.split())
    kept: list[Document] = []
    used = 0
    for doc in docs:
        n = len(doc.contents.split())
        if used + n > budget:
            if not kept and budget > 0:
                words = doc.contents.split()[: max(budget, 1)]
                kept.append(Document(doc.doc_id, " ".join(words)))
                logger.debug("truncated document %s to fit the input budget", doc.doc_id)
            break
        kept.append(doc)
        used += n
    if len(kept) < len(docs):
        logger.debug("dropped %d of %d documents to fit the input budget",
                     len(docs) - len(kept), len(docs))
    return kept


def generate(client, query: str, docs: list[Document], record_id: str | None = None,
             max_input_units: int = 4096) -> str:
    """Generate an answer after enforcing the prompt budget (docs truncate tail-first)."""
    return client.generate(query, _truncate_docs(query, docs, max_input_units),
                           record_id=record_id)


def _resolve(hits: list[tuple[str, float]], by_id: dict[str, Document]) -> list[Document]:
    return [by_id[doc_id] for doc_id, _ in hits]


def _retrieve(config: PipelineConfig, query: str) -> list[tuple[str, float]]:
    q = query
    if config.hooks.pre_retrieval is not None:
        q = config.hooks.pre_retrieval(q)
    hits = config.retriever.search(q, config.k_docs)
    if config.hooks.post_retrieval is not None:
        hits = config.hooks.post_retrieval(hits)
    return hits


def _run_one(record: QueryRecord, by_id: dict[str, Document],
             config: PipelineConfig) -> RunRecord:
    corrected_text = None
    first_hits = None
    query = record.question
    try:
        hits = _retrieve(config, query)
        if config.corrector is not None:
            first_hits = hits
            correction = config.corrector.correct(query, _resolve(hits, by_id))
            corrected_text = correction.corrected_query
            query = corrected_text
            if config.requery_after_correction:
                hits = _retrieve(config, query)
        answer = generate(config.generator, query, _resolve(hits, by_id),
                          record_id=record.id, max_input_units=config.max_input_units)
        for _ in range(config.hooks.iterations - 1):
            hits = config.retriever.search(f"{query} {answer}", config.k_docs)
            answer = generate(config.generator, query, _resolve(hits, by_id),
                              record_id=record.id, max_input_units=config.max_input_units)
        em, f1, acc = evalkit.score_answer(answer, list(record.golden_answers))
        return RunRecord(
            id=record.id, query_used=query, retrieved=hits, answer=answer,
            em=em, f1=f1, acc=acc, corrupted=record.corruption is not None,
            corrected_query=corrected_text, first_retrieval=first_hits,
        )
    except Exception as exc:  # record-and-continue: long runs must survive bad queries
        logger.warning("query %s failed: %s", record.id, exc)
        return RunRecord(
            id=record.id, query_used=query, retrieved=[], answer="",
            em=0, f1=0.0, acc=0, corrupted=record.corruption is not None,
            corrected_query=corrected_text, first_retrieval=first_hits,
            failed=True, error=str(exc),
        )


def _run_all(records: list[QueryRecord], corpus: list[Document],
             config: PipelineConfig) -> tuple[list[RunRecord], evalkit.EvalReport]:
    config.validate()
    if not records:
        raise InvalidInputError("dataset must be nonempty")
    by_id = {d.doc_id: d for d in corpus}
    if config.workers == 1:
        outs = [_run_one(r, by_id, config) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outs = list(pool.map(lambda r: _run_one(r, by_id, config), records))
    report = evalkit.aggregate([
        evalkit.QueryResult(o.id, o.em, o.f1, o.acc, o.corrupted) for o in outs
    ])
    return outs, report


def run_standard_rag(records: list[QueryRecord], corpus: list[Document],
                     config: PipelineConfig) -> tuple[list[RunRecord], evalkit.EvalReport]:
    """Retrieve with the question as given, then generate. No correction."""
    if config.corrector is not None:
        raise InvalidInputError("standard RAG runs with corrector=None")
    return _run_all(records, corpus, config)


def run_qer_rag(records: list[QueryRecord], corpus: list[Document],
                config: PipelineConfig) -> tuple[list[RunRecord], evalkit.EvalReport]:
    """Standard RAG with the error-robust retriever wired into ``config.retriever``."""
    if config.corrector is not None:
        raise InvalidInputError("robust-retriever RAG runs with corrector=None")
    return _run_all(records, corpus, config)


def run_ra_qcg(records: list[QueryRecord], corpus: list[Document],
               config: PipelineConfig) -> tuple[list[RunRecord], evalkit.EvalReport]:
    """Retrieve, correct the query from the evidence, re-retrieve, generate."""
    if config.corrector is None:
        raise InvalidInputError("ra-qcg requires a corrector")
    return _run_all(records, corpus, config)


@dataclass
class QuadrantResult:
    records: dict[str, list[RunRecord]]
    reports: dict[str, evalkit.EvalReport | None]


def run_quadrant(records: list[QueryRecord], corpus: list[Document],
                 config: PipelineConfig) -> QuadrantResult:
    """Evaluate the corrupted subset under the four query/document arms.

    The 'corrected' query of each arm is the recorded original question, so
    the QC arms are the perfect-correction upper bound.  Clean records are
    skipped; a dataset with no corruption metadata yields empty reports.
    """
    config.validate()
    if config.corrector is not None:
        raise InvalidInputError("the quadrant runner manages queries itself; corrector must be None")
    by_id = {d.doc_id: d for d in corpus}
    corrupted = [r for r in records if r.corruption is not None]
    out_records: dict[str, list[RunRecord]] = {c.value: [] for c in QuadrantCase}
    for record in corrupted:
        original = record.corruption.original_question
        queries = {
            QuadrantCase.QE_DE: (record.question, record.question),
            QuadrantCase.QE_DC: (record.question, original),
            QuadrantCase.QC_DE: (original, record.question),
            QuadrantCase.QC_DC: (original, original),
        }
        for case, (gen_query, retrieval_query) in queries.items():
            proxy = QueryRecord(
                id=record.id, question=gen_query,
                golden_answers=record.golden_answers, corruption=record.corruption,
            )
            hits = _retrieve(config, retrieval_query)
            answer = generate(config.generator, gen_query, _resolve(hits, by_id),
                              record_id=record.id, max_input_units=config.max_input_units)
            em, f1, acc = evalkit.score_answer(answer, list(record.golden_answers))
            out_records[case.value].append(RunRecord(
                id=proxy.id, query_used=retrieval_query, retrieved=hits, answer=answer,
                em=em, f1=f1, acc=acc, corrupted=True,
            ))
    reports = {}
    for case, records_ in out_records.items():
        if records_:
            reports[case] = evalkit.aggregate([
                evalkit.QueryResult(o.id, o.em, o.f1, o.acc, True) for o in records_
            ])
        else:
            reports[case] = None
    return QuadrantResult(records=out_records, reports=reports)


def save_run(records: list[RunRecord], report: evalkit.EvalReport, out_dir: str | Path,
             config_snapshot: dict | None = None) -> None:
    """Write records.jsonl, report.json and the config snapshot under one run folder."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    evalkit.save_report(report, out / "report.json")
    if config_snapshot is not None:
        (out / "config.json").write_text(
            json.dumps(config_snapshot, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def load_run_records(path: str | Path) -> list[RunRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            records.append(RunRecord(
                id=d["id"], query_used=d["query_used"],
                retrieved=[(h[0], h[1]) for h in d["retrieved"]],
                answer=d["answer"], em=d["em"], f1=d["f1"], acc=d["acc"],
                corrupted=d["corrupted"], corrected_query=d.get("corrected_query"),
                first_retrieval=None if d.get("first_retrieval") is None
                else [(h[0], h[1]) for h in d["first_retrieval"]],
                failed=d.get("failed", False), error=d.get("error"),
            ))
    return records
