"""Dataset model: corruption orchestration at exact rates, label matching, stats, IO.

Datasets are UTF-8 JSON-lines files, one record per line:

    {"id": str, "question": str, "golden_answers": [str, ...],
     "corruption": null | {"error_type": str, "original_question": str,
                           "edits": [[int, str, str], ...]}}

A corrupted dataset is written together with a sidecar manifest
(``<path>.manifest.json``) recording rate, spec, counts and the source checksum.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ragnoise.errors import InvalidInputError, SchemaError, ValidationError
from ragnoise.rng import substream
from ragnoise.tables import NoiseTables, default_tables
from ragnoise.textnoise import (
    CorruptionSpec,
    Edit,
    ErrorType,
    corrupt_query,
    sample_error_type,
)

_REQUIRED_FIELDS = ("id", "question", "golden_answers")


@dataclass(frozen=True)
class Corruption:
    error_type: ErrorType
    original_question: str
    edits: tuple[Edit, ...]

    def to_dict(self) -> dict:
        return {
            "error_type": self.error_type.value,
            "original_question": self.original_question,
            "edits": [list(e) for e in self.edits],
        }


@dataclass(frozen=True)
class QueryRecord:
    """One QA example; ``corruption`` is present iff the question was perturbed."""

    id: str
    question: str
    golden_answers: tuple[str, ...]
    corruption: Corruption | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "golden_answers": list(self.golden_answers),
            "corruption": self.corruption.to_dict() if self.corruption else None,
        }


def record_from_dict(d: dict, line: int | None = None) -> QueryRecord:
    for name in _REQUIRED_FIELDS:
        if name not in d:
            raise SchemaError(f"record missing field {name!r}", line=line)
    answers = d["golden_answers"]
    if not isinstance(answers, list) or not answers:
        raise SchemaError("golden_answers must be a nonempty list", line=line)
    corruption = None
    raw = d.get("corruption")
    if raw is not None:
        try:
            corruption = Corruption(
                error_type=ErrorType(raw["error_type"]),
                original_question=raw["original_question"],
                edits=tuple((e[0], e[1], e[2]) for e in raw["edits"]),
            )
        except (KeyError, ValueError, IndexError) as exc:
            raise SchemaError(f"bad corruption block: {exc}", line=line) from exc
    return QueryRecord(
        id=str(d["id"]),
        question=d["question"],
        golden_answers=tuple(answers),
        corruption=corruption,
    )


@dataclass
class DatasetStats:
    avg_chars_per_query: float
    avg_words_per_query: float
    n_queries: int


@dataclass
class DatasetManifest:
    """Sidecar metadata for a corrupted dataset."""

    name: str
    corruption_rate: float
    spec: CorruptionSpec
    source_checksum: str
    counts: dict
    sampling: str = "quota"  # exact quotas via largest-remainder; 'bernoulli' for per-query draws
    shortfall: int = 0
    source_name: str | None = None
    allocation: str = ("round(rate * N) records by seeded id shuffle; error types split "
                       "by largest-remainder quota over type_weights, shuffled over the "
                       "chosen records")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "corruption_rate": self.corruption_rate,
            "spec": self.spec.to_dict(),
            "source_checksum": self.source_checksum,
            "counts": self.counts,
            "sampling": self.sampling,
            "shortfall": self.shortfall,
            "source_name": self.source_name,
            "allocation": self.allocation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            name=d["name"],
            corruption_rate=d["corruption_rate"],
            spec=CorruptionSpec.from_dict(d["spec"]),
            source_checksum=d["source_checksum"],
            counts=d["counts"],
            sampling=d.get("sampling", "quota"),
            shortfall=d.get("shortfall", 0),
            source_name=d.get("source_name"),
            allocation=d.get("allocation", ""),
        )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def largest_remainder_split(total: int, weights: tuple[int, ...]) -> list[int]:
    """Split ``total`` proportionally to ``weights`` with largest-remainder rounding.

    Remainder ties go to the lower index, so the split is deterministic.
    """
    wsum = sum(weights)
    raw = [total * w / wsum for w in weights]
    counts = [math.floor(r) for r in raw]
    order = sorted(range(len(weights)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def dataset_checksum(records: list[QueryRecord]) -> str:
    payload = "\n".join(
        json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) for r in records
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _check_clean_unique(records: list[QueryRecord]) -> None:
    seen = set()
    for r in records:
        if r.id in seen:
            raise ValidationError(f"duplicate record id {r.id!r}")
        seen.add(r.id)
        if r.corruption is not None:
            raise InvalidInputError(
                f"record {r.id!r} already carries corruption metadata; refusing to double-corrupt"
            )


def corrupt_dataset(records: list[QueryRecord], rate: float, spec: CorruptionSpec,
                    tables: NoiseTables | None = None, name: str = "dataset",
                    sampling: str = "quota",
                    source_name: str | None = None) -> tuple[list[QueryRecord], DatasetManifest]:
    """Corrupt exactly round(rate * N) records (quota mode), preserving labels.

    Records are chosen by a seeded shuffle of the sorted ids; error types are
    assigned by exact largest-remainder quotas over ``spec.type_weights`` and
    shuffled across the chosen records. A record the noiser cannot change is
    swapped for the next unchosen candidate; any remaining shortfall is
    recorded in the manifest. Unchosen records pass through untouched.
    """
    if not 0.0 <= rate <= 1.0:
        raise InvalidInputError(f"rate {rate} not in [0, 1]")
    if sampling not in ("quota", "bernoulli"):
        raise InvalidInputError(f"unknown sampling mode {sampling!r}")
    spec.validate()
    _check_clean_unique(records)
    tables = tables or default_tables()
    checksum = dataset_checksum(records)

    order = sorted(r.id for r in records)
    substream(spec.seed, "dataset-order").shuffle(order)

    if sampling == "quota":
        n_corrupt = _round_half_up(rate * len(records))
        split = largest_remainder_split(n_corrupt, spec.type_weights)
        assigned = (
            [ErrorType.SPELLING] * split[0]
            + [ErrorType.KEYBOARD] * split[1]
            + [ErrorType.VISUAL] * split[2]
        )
        substream(spec.seed, "type-assign").shuffle(assigned)
    else:
        pick_rng = substream(spec.seed, "bernoulli-pick")
        chosen_ids = [qid for qid in order if pick_rng.random() < rate]
        type_rng = substream(spec.seed, "bernoulli-type")
        n_corrupt = len(chosen_ids)
        assigned = [sample_error_type(spec, type_rng) for _ in chosen_ids]
        order = chosen_ids  # no swap pool in bernoulli mode

    by_id = {r.id: r for r in records}
    corrupted: dict[str, QueryRecord] = {}
    per_type = {t.value: 0 for t in ErrorType}
    cursor = 0
    for error_type in assigned:
        done = False
        while cursor < len(order):
            qid = order[cursor]
            cursor += 1
            record = by_id[qid]
            new_q, edits = corrupt_query(
                record.question, error_type, spec, tables,
                rng=substream(spec.seed, "corrupt", qid),
            )
            if edits:
                corrupted[qid] = QueryRecord(
                    id=record.id,
                    question=new_q,
                    golden_answers=record.golden_answers,
                    corruption=Corruption(error_type, record.question, tuple(edits)),
                )
                per_type[error_type.value] += 1
                done = True
                break
        if not done:
            break

    shortfall = n_corrupt - len(corrupted)
    out = [corrupted.get(r.id, r) for r in records]
    if sampling == "bernoulli":
        allocation = "per-query Bernoulli(rate) selection; error type sampled per query"
    else:
        allocation = DatasetManifest.allocation
    manifest = DatasetManifest(
        name=name,
        corruption_rate=rate,
        spec=spec,
        source_checksum=checksum,
        counts={
            "total": len(records),
            "corrupted": len(corrupted),
            "per_error_type": per_type,
        },
        sampling=sampling,
        shortfall=shortfall,
        source_name=source_name,
        allocation=allocation,
    )
    return out, manifest


def compute_stats(records: list[QueryRecord]) -> DatasetStats:
    """Arithmetic-mean characters (including internal spaces) and whitespace tokens."""
    if not records:
        raise InvalidInputError("cannot compute stats of an empty record list")
    chars = sum(len(r.question) for r in records)
    words = sum(len(r.question.split()) for r in records)
    return DatasetStats(
        avg_chars_per_query=chars / len(records),
        avg_words_per_query=words / len(records),
        n_queries=len(records),
    )


def load_dataset(path: str | Path) -> list[QueryRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"malformed JSON: {exc.msg}", line=lineno) from exc
            record = record_from_dict(d, line=lineno)
            if record.id in seen:
                raise ValidationError(f"duplicate record id {record.id!r} at line {lineno}")
            seen.add(record.id)
            records.append(record)
    return records


def save_dataset(records: list[QueryRecord], path: str | Path,
                 manifest: DatasetManifest | None = None) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    if manifest is not None:
        manifest_path = Path(str(path) + ".manifest.json")
        manifest_path.write_text(
            json.dumps(manifest.to_dict(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )


def load_manifest(path: str | Path) -> DatasetManifest:
    with open(path, encoding="utf-8") as fh:
        return DatasetManifest.from_dict(json.load(fh))


def from_upstream(rows, id_field: str = "id", question_field: str = "question",
                  answers_field: str = "golden_answers") -> list[QueryRecord]:
    """Convert upstream QA rows (dicts) into records.

    Upstream exports are expected to provide a stable id, a question string and
    a nonempty answer list; fetching those exports is out of scope here.
    """
    out = []
    for i, row in enumerate(rows):
        out.append(
            record_from_dict(
                {
                    "id": row.get(id_field, f"q{i:06d}"),
                    "question": row[question_field],
                    "golden_answers": list(row[answers_field]),
                    "corruption": None,
                }
            )
        )
    return out
