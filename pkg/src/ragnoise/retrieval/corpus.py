"""Document corpus: line-delimited ``{"id": str, "contents": str}`` files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ragnoise.errors import SchemaError, ValidationError


@dataclass(frozen=True)
class Document:
    doc_id: str
    contents: str


def validate_corpus(docs: list[Document]) -> None:
    seen = set()
    for d in docs:
        if d.doc_id in seen:
            raise ValidationError(f"duplicate doc_id {d.doc_id!r}")
        seen.add(d.doc_id)
        if not d.contents:
            raise ValidationError(f"document {d.doc_id!r} has empty contents")


def load_corpus(path: str | Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"malformed JSON: {exc.msg}", line=lineno) from exc
            if "id" not in d or "contents" not in d:
                raise SchemaError("corpus record needs 'id' and 'contents'", line=lineno)
            docs.append(Document(doc_id=str(d["id"]), contents=d["contents"]))
    validate_corpus(docs)
    return docs


def save_corpus(docs: list[Document], path: str | Path) -> None:
    validate_corpus(docs)
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.doc_id, "contents": d.contents}, ensure_ascii=False) + "\n")
