"""Sentence splitting per the engine's documented rules.

The contract: split after runs of [.!?] (plus closing quotes/brackets)
followed by whitespace and a capital letter or digit, except when the word
before a period is a known abbreviation or a single uppercase initial.
The shared fixture file fixtures/sentence_splitting.json pins the exact
behavior; tests fail on any divergence from the engine.
"""
from __future__ import annotations

import re

ABBREVIATIONS = frozenset(
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
                if word in ABBREVIATIONS or (len(word) == 1 and raw[0].isupper()):
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
