"""QA answer metrics (EM, token-level F1, Acc) and report aggregation.

Normalization follows the standard SQuAD recipe: lowercase, strip punctuation
characters, drop the articles a/an/the, collapse whitespace.  All three metrics
take the max over gold answers.
"""

from __future__ import annotations

import csv
import io
import json
import re
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ragnoise.errors import InvalidInputError, ValidationError

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


def normalize_answer(text: str) -> str:
    """Normalized answer string (tokens joined by single spaces)."""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def normalize_tokens(text: str) -> list[str]:
    return normalize_answer(text).split()


def exact_match(prediction: str, golds: list[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise InvalidInputError("golds must be nonempty")
    pred = normalize_answer(prediction)
    return int(any(pred == normalize_answer(g) for g in golds))


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(prediction: str, golds: list[str]) -> float:
    """Max over golds of the token-multiset F1 between prediction and gold."""
    if not golds:
        raise InvalidInputError("golds must be nonempty")
    pred_tokens = normalize_tokens(prediction)
    return max(_f1_single(pred_tokens, normalize_tokens(g)) for g in golds)


def _contains_subsequence(haystack: list[str], needle: list[str]) -> bool:
    if not needle:
        return not haystack  # an empty gold only matches an empty prediction
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


def accuracy(prediction: str, golds: list[str]) -> int:
    """1 iff any normalized gold appears as a contiguous token run in the prediction."""
    if not golds:
        raise InvalidInputError("golds must be nonempty")
    pred_tokens = normalize_tokens(prediction)
    return int(any(_contains_subsequence(pred_tokens, normalize_tokens(g)) for g in golds))


def score_answer(prediction: str, golds: list[str]) -> tuple[int, float, int]:
    return exact_match(prediction, golds), token_f1(prediction, golds), accuracy(prediction, golds)


@dataclass(frozen=True)
class QueryResult:
    id: str
    em: int
    f1: float
    acc: int
    corrupted: bool

    def to_dict(self) -> dict:
        return {"id": self.id, "em": self.em, "f1": self.f1, "acc": self.acc,
                "corrupted": self.corrupted}


def _means(results: list[QueryResult]) -> dict:
    n = len(results)
    if n == 0:
        return {"n": 0, "em": 0.0, "f1": 0.0, "acc": 0.0}
    return {
        "n": n,
        "em": sum(r.em for r in results) / n,
        "f1": sum(r.f1 for r in results) / n,
        "acc": sum(r.acc for r in results) / n,
    }


@dataclass
class EvalReport:
    """Per-query metrics plus overall / corrupted-only / clean-only means."""

    per_query: list[QueryResult]
    overall: dict
    corrupted: dict
    clean: dict

    def to_dict(self) -> dict:
        return {
            "per_query": [r.to_dict() for r in self.per_query],
            "aggregates": {
                "overall": self.overall,
                "corrupted": self.corrupted,
                "clean": self.clean,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        per_query = [
            QueryResult(r["id"], r["em"], r["f1"], r["acc"], r["corrupted"])
            for r in d["per_query"]
        ]
        agg = d["aggregates"]
        return cls(per_query, agg["overall"], agg["corrupted"], agg["clean"])


def aggregate(results: list[QueryResult]) -> EvalReport:
    """Aggregate per-query results; output is ordered by id."""
    if not results:
        raise InvalidInputError("cannot aggregate an empty result list")
    seen = set()
    for r in results:
        if r.id in seen:
            raise ValidationError(f"duplicate query id {r.id!r} in results")
        seen.add(r.id)
    ordered = sorted(results, key=lambda r: r.id)
    return EvalReport(
        per_query=ordered,
        overall=_means(ordered),
        corrupted=_means([r for r in ordered if r.corrupted]),
        clean=_means([r for r in ordered if not r.corrupted]),
    )


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_report(path: str | Path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def aggregates_csv(reports: dict[str, EvalReport]) -> str:
    """CSV comparison table of aggregate means, one row per (report, subset)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["run", "subset", "n", "em", "f1", "acc"])
    for name, report in reports.items():
        for subset, agg in (("overall", report.overall), ("corrupted", report.corrupted),
                            ("clean", report.clean)):
            writer.writerow([name, subset, agg["n"],
                             f"{agg['em']:.6f}", f"{agg['f1']:.6f}", f"{agg['acc']:.6f}"])
    return buf.getvalue()
