"""Field-wise BM25 inverted indexes over the verified-claim database.

Okapi variant with the smoothed non-negative idf
    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
and the usual tf saturation / length normalization with parameters k1, b.
Queries are bags of words: duplicate query terms contribute once per
occurrence.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import VerifiedClaim, VerifiedClaimStore
from .runfiles import RankedItem
from .textproc import tokenize

_FIELD_ORDER = ("title", "verclaim", "body")
_FIELD_TEXT = {
    "title": lambda c: c.title,
    "verclaim": lambda c: c.ver_claim,
    "body": lambda c: c.body,
}

INDEX_FORMAT = "claimrank-bm25-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class FieldSpec:
    """Which claim fields form the indexed document text.

    Multi-field specs concatenate the texts in the fixed order title,
    verclaim, body with single spaces; "verclaim+title" and
    "title+verclaim" are the same spec.
    """

    parts: tuple[str, ...]

    @classmethod
    def parse(cls, spec: str) -> "FieldSpec":
        raw = [p.strip().lower() for p in spec.split("+") if p.strip()]
        for p in raw:
            if p not in _FIELD_ORDER:
                raise ValueError(f"unknown field {p!r} in spec {spec!r}")
        if not raw:
            raise ValueError(f"empty field spec {spec!r}")
        if len(set(raw)) != len(raw):
            raise ValueError(f"repeated field in spec {spec!r}")
        return cls(parts=tuple(p for p in _FIELD_ORDER if p in raw))

    @property
    def name(self) -> str:
        return "+".join(self.parts)

    def text(self, claim: VerifiedClaim) -> str:
        return " ".join(t for t in (_FIELD_TEXT[p](claim) for p in self.parts) if t)


class InvertedIndex:
    """Postings, document lengths and BM25 parameters for one field spec."""

    def __init__(
        self,
        field: FieldSpec,
        postings: dict[str, list[tuple[str, int]]],
        doc_lengths: dict[str, int],
        k1: float,
        b: float,
    ):
        self.field = field
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.k1 = k1
        self.b = b
        self.doc_count = len(doc_lengths)
        total = sum(doc_lengths.values())
        self.avg_doc_length = total / self.doc_count if self.doc_count else 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def term_frequency(self, term: str, doc_id: str) -> int:
        plist = self.postings.get(term)
        if not plist:
            return 0
        i = bisect_left(plist, (doc_id,))
        if i < len(plist) and plist[i][0] == doc_id:
            return plist[i][1]
        return 0


def build_index(
    claims: VerifiedClaimStore,
    field: FieldSpec | str,
    k1: float = 1.2,
    b: float = 0.75,
) -> InvertedIndex:
    """Index tokenize(field text) of every claim in the store.

    Claims whose field text is empty get length 0 and can never be
    retrieved. Postings are sorted by doc id so the index is identical no
    matter the construction order.
    """
    if isinstance(field, str):
        field = FieldSpec.parse(field)
    if len(claims) == 0:
        raise ValueError("cannot build an index over an empty claim store")
    if k1 <= 0:
        raise ValueError(f"k1 must be > 0, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must be in [0, 1], got {b}")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for claim in claims:
        tokens = tokenize(field.text(claim))
        doc_lengths[claim.id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((claim.id, tf))
    for plist in postings.values():
        plist.sort()
    return InvertedIndex(field=field, postings=postings, doc_lengths=doc_lengths, k1=k1, b=b)


def _term_doc_score(index: InvertedIndex, idf: float, tf: int, doc_len: int) -> float:
    denom = tf + index.k1 * (1.0 - index.b + index.b * doc_len / index.avg_doc_length)
    return idf * tf * (index.k1 + 1.0) / denom


def bm25_score(index: InvertedIndex, query_tokens: Sequence[str], doc_id: str) -> float:
    """BM25 score of one document for a tokenized query; 0 if no overlap."""
    if doc_id not in index.doc_lengths:
        raise ValueError(f"unknown doc id {doc_id!r}")
    doc_len = index.doc_lengths[doc_id]
    score = 0.0
    for term, qtf in Counter(query_tokens).items():
        tf = index.term_frequency(term, doc_id)
        if tf == 0:
            continue
        score += qtf * _term_doc_score(index, index.idf(term), tf, doc_len)
    return score


def retrieve(index: InvertedIndex, query_text: str, top_n: int) -> list[RankedItem]:
    """Top-n docs with score > 0, sorted by score descending, ties by doc id."""
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    scores: dict[str, float] = {}
    for term, qtf in Counter(tokenize(query_text)).items():
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            contrib = qtf * _term_doc_score(index, idf, tf, index.doc_lengths[doc_id])
            scores[doc_id] = scores.get(doc_id, 0.0) + contrib
    ranked = sorted(
        ((doc_id, s) for doc_id, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )[:top_n]
    return [RankedItem(doc_id=d, score=s, rank=i + 1) for i, (d, s) in enumerate(ranked)]


def retrieve_score_sum(
    indexes: Iterable[InvertedIndex], query_text: str, top_n: int
) -> list[RankedItem]:
    """Alternative multi-field combination: sum per-field BM25 scores.

    The default treatment of combined fields is text concatenation
    (build_index on a multi-part FieldSpec); this is the score-sum variant
    kept for comparison.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    totals: dict[str, float] = {}
    query = tokenize(query_text)
    for index in indexes:
        for term, qtf in Counter(query).items():
            plist = index.postings.get(term)
            if not plist:
                continue
            idf = index.idf(term)
            for doc_id, tf in plist:
                contrib = qtf * _term_doc_score(index, idf, tf, index.doc_lengths[doc_id])
                totals[doc_id] = totals.get(doc_id, 0.0) + contrib
    ranked = sorted(
        ((doc_id, s) for doc_id, s in totals.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )[:top_n]
    return [RankedItem(doc_id=d, score=s, rank=i + 1) for i, (d, s) in enumerate(ranked)]


def save_index(index: InvertedIndex, path) -> None:
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "field": index.field.name,
        "k1": index.k1,
        "b": index.b,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[d, tf] for d, tf in plist] for t, plist in sorted(index.postings.items())},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, sort_keys=True)


def load_index(path) -> InvertedIndex:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != INDEX_FORMAT:
        raise ValueError(f"{path}: not a {INDEX_FORMAT} file")
    if payload.get("version") != INDEX_VERSION:
        raise ValueError(f"{path}: unsupported index version {payload.get('version')!r}")
    postings = {t: [(d, int(tf)) for d, tf in plist] for t, plist in payload["postings"].items()}
    return InvertedIndex(
        field=FieldSpec.parse(payload["field"]),
        postings=postings,
        doc_lengths={d: int(n) for d, n in payload["doc_lengths"].items()},
        k1=float(payload["k1"]),
        b=float(payload["b"]),
    )
