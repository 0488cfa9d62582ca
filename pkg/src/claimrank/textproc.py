"""Tokenization, TF.IDF vectors, cosine similarity, and sentence splitting.

Everything here is deterministic and rule-based on purpose: lexical
preprocessing has to be reproducible byte-for-byte across runs so that
indexes, histograms and embeddings built from it are reproducible too.
"""
from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

URL_TOKEN = "URL"
MENTION_TOKEN = "MENTION"

# One scan: URLs and @-mentions collapse to placeholder tokens, everything
# else is split on non-alphanumeric runs and lowercased.
_TOKEN_RE = re.compile(
    r"(?P<url>(?:https?://|www\.|pic\.twitter\.com/)\S+)"
    r"|(?P<mention>@\w+)"
    r"|(?P<word>[^\W_]+)",
    re.UNICODE,
)


class ZeroNormWarning(UserWarning):
    """cosine() received a zero-norm operand; the result was pinned to 0.0."""


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens; URLs -> "URL", @-mentions -> "MENTION".

    The placeholder tokens survive re-tokenization unchanged, so
    tokenize(" ".join(tokenize(x))) == tokenize(x).
    """
    tokens: list[str] = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "url":
            tokens.append(URL_TOKEN)
        elif kind == "mention":
            tokens.append(MENTION_TOKEN)
        else:
            word = m.group("word")
            if word in (URL_TOKEN, MENTION_TOKEN):
                tokens.append(word)
            else:
                tokens.append(word.lower())
    return tokens


class SparseVector:
    """Term -> weight map with a lazily computed L2 norm.

    Zero-weight entries are dropped at construction time.
    """

    __slots__ = ("entries", "_norm")

    def __init__(self, entries: Mapping[str, float]):
        self.entries: dict[str, float] = {t: w for t, w in entries.items() if w != 0.0}
        self._norm: float | None = None

    @property
    def norm(self) -> float:
        if self._norm is None:
            self._norm = math.sqrt(sum(w * w for w in self.entries.values()))
        return self._norm

    def dot(self, other: "SparseVector") -> float:
        a, b = self.entries, other.entries
        if len(b) < len(a):
            a, b = b, a
        return sum(w * b[t] for t, w in a.items() if t in b)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SparseVector) and self.entries == other.entries

    def __repr__(self) -> str:
        return f"SparseVector({self.entries!r})"


@dataclass(frozen=True)
class TfidfModel:
    """IDF table fitted on a corpus: idf = ln((1+N)/(1+df)) + 1.

    Terms unseen at fit time fall back to the df=0 value of the same
    smoothed formula.
    """

    idf: dict[str, float]
    doc_count: int
    unseen_idf: float


def tfidf_fit(corpus: Iterable[str]) -> TfidfModel:
    df: Counter[str] = Counter()
    n_docs = 0
    for text in corpus:
        n_docs += 1
        df.update(set(tokenize(text)))
    if n_docs == 0:
        raise ValueError("cannot fit TF.IDF on an empty corpus")
    idf = {t: math.log((1 + n_docs) / (1 + d)) + 1.0 for t, d in df.items()}
    return TfidfModel(idf=idf, doc_count=n_docs, unseen_idf=math.log(1 + n_docs) + 1.0)


def tfidf_transform(model: TfidfModel, text: str) -> SparseVector:
    """Weight each term by tf * idf; raw term frequency, no normalization."""
    tf = Counter(tokenize(text))
    return SparseVector({t: c * model.idf.get(t, model.unseen_idf) for t, c in tf.items()})


def _dense_cosine(u, v) -> float:
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dense cosine dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        warnings.warn("zero-norm operand in cosine; returning 0.0", ZeroNormWarning, stacklevel=3)
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cosine(u, v) -> float:
    """Cosine similarity for two sparse or two dense vectors.

    A zero-norm operand yields 0.0 and a ZeroNormWarning instead of a crash.
    """
    if isinstance(u, SparseVector) or isinstance(v, SparseVector):
        if not (isinstance(u, SparseVector) and isinstance(v, SparseVector)):
            raise TypeError("cosine operands must both be sparse or both dense")
        if u.norm == 0.0 or v.norm == 0.0:
            warnings.warn("zero-norm operand in cosine; returning 0.0", ZeroNormWarning, stacklevel=2)
            return 0.0
        return u.dot(v) / (u.norm * v.norm)
    return _dense_cosine(u, v)


# Words that end with "." without closing a sentence. Single uppercase
# letters (initials like "W.") are guarded separately.
_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "hon", "st", "jr", "sr",
        "sen", "rep", "gov", "gen", "sgt", "col", "capt", "lt", "maj", "adm",
        "sec", "pres", "vs", "etc", "inc", "corp", "co", "dept", "univ",
        "approx", "est", "fig", "vol", "no", "p", "pp", "jan", "feb", "mar",
        "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
        "mon", "tue", "wed", "thu", "fri", "sat", "sun", "e.g", "i.e",
        "u.s", "u.k", "u.n", "d.c", "a.m", "p.m",
    }
)

_BOUNDARY_RE = re.compile(r'([.!?]+["\')\]]*)(\s+)')
_LEAD_PUNCT_RE = re.compile(r'["\'(\[]+')
_LAST_WORD_RE = re.compile(r"([^\W\d_][\w.]*)$", re.UNICODE)


def _opens_sentence(rest: str) -> bool:
    lead = _LEAD_PUNCT_RE.match(rest)
    ch = rest[lead.end() : lead.end() + 1] if lead else rest[:1]
    return bool(ch) and (ch.isupper() or ch.isdigit())


def split_sentences(body: str) -> list[str]:
    """Deterministic sentence split on [.!?] + whitespace + capital/digit.

    A period is not a boundary when the preceding word is a known
    abbreviation or a single uppercase letter (an initial). Returns
    stripped sentences; empty input gives an empty list.
    """
    if not body or not body.strip():
        return []
    cuts: list[int] = []
    for m in _BOUNDARY_RE.finditer(body):
        if not _opens_sentence(body[m.end() :]):
            continue
        if "." in m.group(1):
            wm = _LAST_WORD_RE.search(body[: m.start()])
            if wm is not None:
                raw = wm.group(1)
                word = raw.rstrip(".").lower()
                if word in _ABBREVIATIONS or (len(word) == 1 and raw[0].isupper()):
                    continue
        cuts.append(m.end(1))
    pieces: list[str] = []
    prev = 0
    for cut in cuts + [len(body)]:
        piece = body[prev:cut].strip()
        if piece:
            pieces.append(piece)
        prev = cut
    return pieces


@dataclass(frozen=True)
class HistogramRow:
    threshold: float
    count: int
    percent: float


def similarity_histogram(pairs, claims, thresholds: Sequence[float]) -> list[HistogramRow]:
    """Count linked pairs whose TF.IDF cosine(input, ver_claim) exceeds each threshold.

    The TF.IDF model is fitted on the union of all input-claim texts and all
    ver_claim texts. Counts are strictly-greater-than, so they are monotone
    non-increasing in the threshold.
    """
    corpus = [inp.text for inp in pairs.inputs]
    corpus.extend(claim.ver_claim for claim in claims)
    model = tfidf_fit(corpus)

    input_vecs = {inp.id: tfidf_transform(model, inp.text) for inp in pairs.inputs}
    claim_vecs: dict[str, SparseVector] = {}
    sims: list[float] = []
    for pair in pairs.pairs:
        if pair.verified_id not in claim_vecs:
            claim_vecs[pair.verified_id] = tfidf_transform(
                model, claims.get(pair.verified_id).ver_claim
            )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroNormWarning)
            sims.append(cosine(input_vecs[pair.input_id], claim_vecs[pair.verified_id]))

    total = len(sims)
    rows = []
    for t in thresholds:
        count = sum(1 for s in sims if s > t)
        rows.append(HistogramRow(threshold=t, count=count, percent=100.0 * count / total if total else 0.0))
    return rows


def write_histogram_tsv(rows: Sequence[HistogramRow], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("threshold\tcount\tpercent\n")
        for r in rows:
            f.write(f"{r.threshold:.2f}\t{r.count}\t{r.percent:.1f}\n")
