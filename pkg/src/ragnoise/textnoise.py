"""Deterministic injection of query entry errors into a single query string.

Three error channels, all word-to-word substitutions so whitespace token
counts are preserved:

* keyboard -- replace letters with physically adjacent QWERTY keys;
* visual   -- replace letters with look-alike characters;
* spelling -- replace a whole word with a common misspelling (falling back
  to the keyboard channel for words without a dictionary entry).

Every decision is drawn from a caller-provided (or seed-derived) SplitMix64
stream, so identical inputs give byte-identical outputs on any platform.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from ragnoise.errors import InvalidInputError
from ragnoise.rng import SeededRng, substream
from ragnoise.tables import NoiseTables, default_tables

_WS_SPLIT = re.compile(r"(\s+)")

Edit = tuple[int, str, str]


class ErrorType(str, Enum):
    SPELLING = "spelling"
    KEYBOARD = "keyboard"
    VISUAL = "visual"


@dataclass(frozen=True)
class CorruptionSpec:
    """Full parameterization of the error-injection process."""

    word_select_prob: float = 0.3
    char_corrupt_prob: float = 0.3
    type_weights: tuple[int, int, int] = (3, 1, 1)  # spelling, keyboard, visual
    seed: int = 0
    min_word_len: int = 3
    max_resample_attempts: int = 16

    def validate(self) -> None:
        if not 0.0 <= self.word_select_prob <= 1.0:
            raise InvalidInputError(f"word_select_prob {self.word_select_prob} not in [0, 1]")
        if not 0.0 <= self.char_corrupt_prob <= 1.0:
            raise InvalidInputError(f"char_corrupt_prob {self.char_corrupt_prob} not in [0, 1]")
        if len(self.type_weights) != 3 or any(w < 0 for w in self.type_weights):
            raise InvalidInputError(f"type_weights {self.type_weights} must be 3 nonnegative ints")
        if sum(self.type_weights) == 0:
            raise InvalidInputError("type_weights must not all be zero")
        if self.min_word_len < 1:
            raise InvalidInputError("min_word_len must be >= 1")
        if self.max_resample_attempts < 1:
            raise InvalidInputError("max_resample_attempts must be >= 1")

    def to_dict(self) -> dict:
        return {
            "word_select_prob": self.word_select_prob,
            "char_corrupt_prob": self.char_corrupt_prob,
            "type_weights": list(self.type_weights),
            "seed": self.seed,
            "min_word_len": self.min_word_len,
            "max_resample_attempts": self.max_resample_attempts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorruptionSpec":
        spec = cls(
            word_select_prob=d["word_select_prob"],
            char_corrupt_prob=d["char_corrupt_prob"],
            type_weights=tuple(d["type_weights"]),
            seed=d["seed"],
            min_word_len=d.get("min_word_len", 3),
            max_resample_attempts=d.get("max_resample_attempts", 16),
        )
        spec.validate()
        return spec


def sample_error_type(spec: CorruptionSpec, rng: SeededRng) -> ErrorType:
    """Draw one of the three error types proportionally to ``spec.type_weights``.

    Consumes exactly one RNG draw.
    """
    spec.validate()
    total = sum(spec.type_weights)
    r = rng.random() * total
    if r < spec.type_weights[0]:
        return ErrorType.SPELLING
    if r < spec.type_weights[0] + spec.type_weights[1]:
        return ErrorType.KEYBOARD
    return ErrorType.VISUAL


def _eligible(token: str, min_word_len: int) -> bool:
    return sum(c.isalpha() for c in token) >= min_word_len


def _substitute_chars(word: str, table: dict[str, tuple[str, ...]], char_prob: float,
                      rng: SeededRng) -> str:
    """Keyboard/visual channel: per-character substitution with a forced minimum of one."""
    positions = [i for i, c in enumerate(word) if c.isalpha() and c.lower() in table]
    if not positions:
        return word
    hits = [i for i in positions if rng.random() < char_prob]
    if not hits:
        hits = [positions[rng.below(len(positions))]]
    chars = list(word)
    for i in hits:
        original = chars[i]
        replacement = rng.choice(table[original.lower()])
        if original.isupper() and replacement.isalpha():
            replacement = replacement.upper()
        chars[i] = replacement
    return "".join(chars)


def _split_core(token: str) -> tuple[str, str, str]:
    """Split a token into (prefix, core, suffix) where the core is alphanumeric."""
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[:start], token[start:end], token[end:]


def _misspell(token: str, tables: NoiseTables, char_prob: float, rng: SeededRng) -> str:
    """Spelling channel: dictionary replacement, keyboard fallback for unknown words."""
    prefix, core, suffix = _split_core(token)
    wrongs = tables.misspellings.get(core.lower())
    if wrongs is None:
        return _substitute_chars(token, tables.keyboard, char_prob, rng)
    replacement = rng.choice(wrongs)
    if core[:1].isupper():
        replacement = replacement[0].upper() + replacement[1:]
    return prefix + replacement + suffix


def _corrupt_once(parts: list[str], error_type: ErrorType, spec: CorruptionSpec,
                  tables: NoiseTables, rng: SeededRng) -> tuple[list[str], list[Edit]]:
    out = list(parts)
    edits: list[Edit] = []
    word_index = -1
    for i in range(0, len(parts), 2):  # even slots are tokens, odd slots whitespace
        token = parts[i]
        if not token:
            continue
        word_index += 1
        if not _eligible(token, spec.min_word_len):
            continue
        if rng.random() >= spec.word_select_prob:
            continue
        if error_type is ErrorType.SPELLING:
            corrupted = _misspell(token, tables, spec.char_corrupt_prob, rng)
        elif error_type is ErrorType.KEYBOARD:
            corrupted = _substitute_chars(token, tables.keyboard, spec.char_corrupt_prob, rng)
        else:
            corrupted = _substitute_chars(token, tables.visual, spec.char_corrupt_prob, rng)
        if corrupted != token:
            out[i] = corrupted
            edits.append((word_index, token, corrupted))
    return out, edits


def corrupt_query(query: str, error_type: ErrorType, spec: CorruptionSpec,
                  tables: NoiseTables | None = None,
                  rng: SeededRng | None = None) -> tuple[str, list[Edit]]:
    """Corrupt one query with the given error type.

    Whitespace runs are preserved byte-for-byte; only selected tokens change.
    If a pass leaves the query identical (nothing selected, or nothing
    corruptible), it is retried on the advancing RNG state up to
    ``spec.max_resample_attempts`` total passes; an uncorruptible query is
    returned unchanged with an empty edit list.
    """
    if not query:
        raise InvalidInputError("query must be nonempty")
    spec.validate()
    tables = tables or default_tables()
    rng = rng or substream(spec.seed, "query")
    parts = _WS_SPLIT.split(query)  # alternating token / whitespace slots
    for _ in range(spec.max_resample_attempts):
        out, edits = _corrupt_once(parts, error_type, spec, tables, rng)
        if edits:
            return "".join(out), edits
    return query, []
