"""Bundled corruption tables: keyboard adjacency, visual confusions, misspellings.

All tables live as TSV files under ``ragnoise/data`` (UTF-8, lowercase keys,
``#`` comment lines) and are validated on load.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ragnoise.errors import TableError

_LETTERS = set(string.ascii_lowercase)


def _data_path(name: str) -> Path:
    return Path(str(resources.files("ragnoise").joinpath("data", name)))


def _read_tsv(path: Path) -> list[tuple[str, list[str]]]:
    rows = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise TableError(f"{path.name}:{lineno}: expected 'key<TAB>values', got {raw!r}")
        key, values = parts[0], [v for v in parts[1].split(",") if v]
        if not values:
            raise TableError(f"{path.name}:{lineno}: no values for key {key!r}")
        rows.append((key, values))
    return rows


def load_keyboard_adjacency(path: Path | None = None) -> dict[str, tuple[str, ...]]:
    """QWERTY adjacency map. Validated: complete over a-z, irreflexive, symmetric."""
    path = path or _data_path("keyboard_adjacency.tsv")
    table = {k: tuple(v) for k, v in _read_tsv(path)}
    missing = _LETTERS - set(table)
    if missing:
        raise TableError(f"keyboard adjacency missing letters: {sorted(missing)}")
    for letter, neighbors in table.items():
        if letter not in _LETTERS:
            raise TableError(f"keyboard adjacency key {letter!r} is not a lowercase letter")
        for n in neighbors:
            if n not in _LETTERS:
                raise TableError(f"adjacency of {letter!r} contains non-letter {n!r}")
            if n == letter:
                raise TableError(f"letter {letter!r} adjacent to itself")
            if letter not in table.get(n, ()):
                raise TableError(f"adjacency not symmetric: {letter!r} -> {n!r}")
    return table


def load_visual_confusion(path: Path | None = None) -> dict[str, tuple[str, ...]]:
    """Visual confusion map: letter -> 1:1 look-alike substitutions (letters/digits)."""
    path = path or _data_path("visual_confusion.tsv")
    table = {k: tuple(v) for k, v in _read_tsv(path)}
    allowed = _LETTERS | set(string.digits)
    for letter, subs in table.items():
        if letter not in _LETTERS:
            raise TableError(f"visual confusion key {letter!r} is not a lowercase letter")
        for s in subs:
            if len(s) != 1 or s not in allowed:
                raise TableError(f"confusion of {letter!r} has invalid substitution {s!r}")
            if s == letter:
                raise TableError(f"identity mapping {letter!r} -> {s!r}")
    return table


def load_misspellings(path: Path | None = None) -> dict[str, tuple[str, ...]]:
    """Misspelling dictionary: correct word -> common misspellings."""
    path = path or _data_path("misspellings.tsv")
    table = {k: tuple(v) for k, v in _read_tsv(path)}
    for word, wrongs in table.items():
        if word != word.lower():
            raise TableError(f"misspelling key {word!r} is not lowercase")
        for w in wrongs:
            if not w.isalpha():
                raise TableError(f"misspelling {w!r} of {word!r} is not alphabetic")
            if w == word:
                raise TableError(f"misspelling of {word!r} equals the word itself")
    return table


def load_base_lexicon(path: Path | None = None) -> frozenset[str]:
    """Known-correct word list used as the overcorrection guard."""
    path = path or _data_path("base_lexicon.txt")
    words = set()
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        words.update(line.split())
    return frozenset(words)


@dataclass(frozen=True)
class NoiseTables:
    """The three corruption tables, bundled for convenience."""

    keyboard: dict[str, tuple[str, ...]]
    visual: dict[str, tuple[str, ...]]
    misspellings: dict[str, tuple[str, ...]]


_DEFAULT: NoiseTables | None = None


def default_tables() -> NoiseTables:
    """Validated bundled tables, loaded once per process."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = NoiseTables(
            keyboard=load_keyboard_adjacency(),
            visual=load_visual_confusion(),
            misspellings=load_misspellings(),
        )
    return _DEFAULT
