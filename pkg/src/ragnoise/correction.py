"""Retrieval-augmented query correction with an overcorrection guard.

Out-of-lexicon tokens are matched against a weighted lexicon built from the
retrieved documents plus a bundled known-correct word list, under a weighted
edit distance whose substitution costs are cheaper for keyboard-adjacent and
visually confusable characters (the same channels used to inject errors).
Tokens already in any lexicon are never touched, so fully-correct queries pass
through unchanged.
"""

from __future__ import annotations

import logging
import math
import re
import string
from dataclasses import dataclass, field

import numpy as np

from ragnoise import kernels
from ragnoise.errors import InvalidInputError
from ragnoise.retrieval.corpus import Document
from ragnoise.tables import NoiseTables, default_tables, load_base_lexicon

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"\w+")
_WS_SPLIT = re.compile(r"(\s+)")
_ALPHABET = string.ascii_lowercase + string.digits
_CLASS = {c: i for i, c in enumerate(_ALPHABET)}


@dataclass(frozen=True)
class ChannelParams:
    """Per-operation costs of the weighted edit distance."""

    keyboard_sub_cost: float = 0.6
    visual_sub_cost: float = 0.6
    generic_sub_cost: float = 1.0
    insert_cost: float = 1.1
    delete_cost: float = 1.1

    def validate(self) -> None:
        costs = (self.keyboard_sub_cost, self.visual_sub_cost, self.generic_sub_cost,
                 self.insert_cost, self.delete_cost)
        if any(c <= 0 for c in costs):
            raise InvalidInputError(f"channel costs must be positive, got {costs}")
        if self.keyboard_sub_cost > self.generic_sub_cost:
            raise InvalidInputError("keyboard_sub_cost must be <= generic_sub_cost")
        if self.visual_sub_cost > self.generic_sub_cost:
            raise InvalidInputError("visual_sub_cost must be <= generic_sub_cost")


@dataclass
class CorrectionContext:
    """Everything the grounded corrector needs for one query."""

    query: str
    retrieved_docs: list[Document] = field(default_factory=list)
    base_lexicon: frozenset[str] | None = None
    channel: ChannelParams = field(default_factory=ChannelParams)
    lm_weight: float = 0.3
    max_edit_distance: float = 2.0
    tables: NoiseTables | None = None

    def validate(self) -> None:
        if not self.query:
            raise InvalidInputError("query must be nonempty")
        self.channel.validate()
        if self.lm_weight < 0:
            raise InvalidInputError("lm_weight must be >= 0")
        if self.max_edit_distance < 1:
            raise InvalidInputError("max_edit_distance must be >= 1")


@dataclass
class CorrectionResult:
    corrected_query: str
    changed: list[tuple[int, str, str, float]]  # (token index, original, corrected, margin)
    untouched_count: int

    def to_dict(self) -> dict:
        return {
            "corrected_query": self.corrected_query,
            "changed": [list(c) for c in self.changed],
            "untouched_count": self.untouched_count,
        }


def build_candidate_lexicon(retrieved_docs: list[Document],
                            base_lexicon: frozenset[str],
                            floor_weight: float = 1.0) -> dict[str, float]:
    """Document vocabulary with frequency weights, unioned with the base list.

    Document tokens carry their occurrence counts; base words carry the floor
    weight, added on top for words appearing in both.
    """
    lexicon: dict[str, float] = {}
    for doc in retrieved_docs:
        for token in _TOKEN.findall(doc.contents.lower()):
            lexicon[token] = lexicon.get(token, 0.0) + 1.0
    for word in base_lexicon:
        lexicon[word] = lexicon.get(word, 0.0) + floor_weight
    return lexicon


def _split_core(token: str) -> tuple[str, str, str]:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[:start], token[start:end], token[end:]


def _cost_table(tables: NoiseTables, channel: ChannelParams) -> np.ndarray:
    """Class-pair substitution costs over [a-z0-9]; equality is handled upstream."""
    n = len(_ALPHABET)
    cost = np.full((n, n), channel.generic_sub_cost, dtype=np.float64)
    for a, subs in tables.visual.items():
        for s in subs:
            cost[_CLASS[a], _CLASS[s]] = channel.visual_sub_cost
            cost[_CLASS[s], _CLASS[a]] = channel.visual_sub_cost
    for a, neighbors in tables.keyboard.items():
        for nb in neighbors:
            cost[_CLASS[a], _CLASS[nb]] = channel.keyboard_sub_cost
            cost[_CLASS[nb], _CLASS[a]] = channel.keyboard_sub_cost
    return cost


def _encode(word: str, width: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    width = width if width is not None else len(word)
    cp = np.zeros(width, dtype=np.int64)
    cls = np.full(width, -1, dtype=np.int64)
    for i, ch in enumerate(word):
        cp[i] = ord(ch)
        cls[i] = _CLASS.get(ch, -1)
    return cp, cls


@dataclass
class _Candidates:
    words: list[str]
    weights: np.ndarray
    cp: np.ndarray
    cls: np.ndarray
    lens: np.ndarray
    total_weight: float


def _prepare_candidates(lexicon: dict[str, float]) -> _Candidates:
    words = sorted(lexicon)
    width = max((len(w) for w in words), default=1)
    cp = np.zeros((len(words), width), dtype=np.int64)
    cls = np.full((len(words), width), -1, dtype=np.int64)
    lens = np.zeros(len(words), dtype=np.int64)
    for i, w in enumerate(words):
        wcp, wcls = _encode(w, width)
        cp[i], cls[i], lens[i] = wcp, wcls, len(w)
    return _Candidates(
        words=words,
        weights=np.array([lexicon[w] for w in words], dtype=np.float64),
        cp=cp, cls=cls, lens=lens,
        total_weight=float(sum(lexicon.values())),
    )


def _best_candidate(core: str, cands: _Candidates, cost_table: np.ndarray,
                    ctx: CorrectionContext) -> tuple[str, float] | None:
    """Minimum-score candidate within the edit-distance budget, or None."""
    max_len_diff = int(ctx.max_edit_distance / min(ctx.channel.insert_cost,
                                                   ctx.channel.delete_cost))
    keep = np.abs(cands.lens - len(core)) <= max_len_diff
    if not keep.any():
        return None
    sel = np.nonzero(keep)[0]
    a_cp, a_cls = _encode(core)
    dist = kernels.edit_distance_scan(
        a_cp, a_cls, cands.cp[sel], cands.cls[sel], cands.lens[sel],
        cost_table, ctx.channel.generic_sub_cost,
        ctx.channel.insert_cost, ctx.channel.delete_cost,
    )
    within = dist <= ctx.max_edit_distance
    if not within.any():
        return None
    idx = sel[within]
    scores = dist[within] - ctx.lm_weight * np.log(cands.weights[idx] / cands.total_weight)
    ranked = sorted(
        ((float(scores[i]), cands.words[j]) for i, j in enumerate(idx)),
        key=lambda p: (p[0], p[1]),
    )
    best_score, best_word = ranked[0]
    margin = math.inf if len(ranked) == 1 else ranked[1][0] - best_score
    return best_word, margin


def correct_query(ctx: CorrectionContext) -> CorrectionResult:
    """Correct out-of-lexicon tokens using retrieved-document evidence.

    A token whose normalized core appears in the base lexicon or the weighted
    lexicon is never changed (overcorrection guard); remaining tokens get the
    cheapest candidate under ``channel_cost - lm_weight * log(weight / total)``,
    ties broken lexicographically, unchanged when nothing is within reach.
    """
    ctx.validate()
    base = ctx.base_lexicon if ctx.base_lexicon is not None else load_base_lexicon()
    tables = ctx.tables or default_tables()
    lexicon = build_candidate_lexicon(ctx.retrieved_docs, base)
    cands = _prepare_candidates(lexicon)
    cost_table = _cost_table(tables, ctx.channel)

    parts = _WS_SPLIT.split(ctx.query)
    changed: list[tuple[int, str, str, float]] = []
    untouched = 0
    word_index = -1
    for i in range(0, len(parts), 2):
        token = parts[i]
        if not token:
            continue
        word_index += 1
        prefix, core, suffix = _split_core(token)
        low = core.lower()
        if not core or core.isdigit() or low in base or low in lexicon:
            untouched += 1
            continue
        found = _best_candidate(low, cands, cost_table, ctx)
        if found is None:
            untouched += 1
            continue
        word, margin = found
        if core[:1].isupper():
            word = word[0].upper() + word[1:]
        corrected = prefix + word + suffix
        if corrected == token:
            untouched += 1
            continue
        parts[i] = corrected
        changed.append((word_index, token, corrected, margin))
    return CorrectionResult(
        corrected_query="".join(parts),
        changed=changed,
        untouched_count=untouched,
    )


DEFAULT_CORRECTION_TEMPLATE = "correction.txt"


def render_correction_prompt(template: str, query: str, docs: list[Document]) -> str:
    numbered = "\n".join(f"{i + 1}. {d.contents}" for i, d in enumerate(docs))
    return template.format(query=query, documents=numbered)


def correct_query_external(ctx: CorrectionContext, client,
                           prompt_template: str) -> CorrectionResult:
    """Send the correction prompt to a generation endpoint; fail open on trouble.

    The first nonempty line of the reply is taken as the corrected query.  An
    empty reply, a transport failure after retries, or a reply whose token
    count differs from the input all fall back to the original query.
    """
    ctx.validate()
    prompt = render_correction_prompt(prompt_template, ctx.query, ctx.retrieved_docs)
    try:
        reply = client.complete(prompt)
    except Exception as exc:
        logger.warning("correction endpoint failed (%s); passing query through", exc)
        return CorrectionResult(ctx.query, [], len(ctx.query.split()))

    corrected = next((line.strip() for line in (reply or "").splitlines() if line.strip()), "")
    original_tokens = ctx.query.split()
    new_tokens = corrected.split()
    if not corrected or len(new_tokens) != len(original_tokens):
        if corrected:
            logger.warning("correction reply token count mismatch; passing query through")
        else:
            logger.warning("empty correction reply; passing query through")
        return CorrectionResult(ctx.query, [], len(original_tokens))

    changed = [
        (i, orig, new, math.inf)
        for i, (orig, new) in enumerate(zip(original_tokens, new_tokens))
        if orig != new
    ]
    return CorrectionResult(corrected, changed, len(original_tokens) - len(changed))
