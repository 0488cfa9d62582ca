"""Ranked lists and the TREC-style run / qrels file formats.

Run lines are tab-separated (query_id, doc_id, rank, score, tag); the
six-column TREC layout with the literal "Q0" column is accepted on read.
Qrels lines are (query_id, doc_id); the four-column TREC layout is
accepted on read, keeping rows with relevance > 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence


@dataclass(frozen=True)
class RankedItem:
    doc_id: str
    score: float
    rank: int


def write_run(path, run: Mapping[str, Sequence[RankedItem]], tag: str) -> None:
    """Write query blocks sorted by query id so output is byte-reproducible."""
    with open(path, "w", encoding="utf-8") as f:
        for query_id in sorted(run):
            for item in run[query_id]:
                f.write(f"{query_id}\t{item.doc_id}\t{item.rank}\t{item.score:.6f}\t{tag}\n")


def read_run(path) -> dict[str, list[RankedItem]]:
    run: dict[str, list[RankedItem]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            cells = line.split()
            if len(cells) == 6:  # TREC: qid Q0 doc rank score tag
                qid, _, doc_id, rank, score = cells[:5]
            elif len(cells) == 5:
                qid, doc_id, rank, score = cells[:4]
            else:
                raise ValueError(f"{path}:{lineno}: expected 5 or 6 run columns, got {len(cells)}")
            run.setdefault(qid, []).append(
                RankedItem(doc_id=doc_id, score=float(score), rank=int(rank))
            )
    for items in run.values():
        items.sort(key=lambda it: it.rank)
    return run


def write_qrels(path, qrels: Mapping[str, set[str]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for query_id in sorted(qrels):
            for doc_id in sorted(qrels[query_id]):
                f.write(f"{query_id}\t{doc_id}\n")


def read_qrels(path) -> dict[str, set[str]]:
    qrels: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            cells = line.split()
            if len(cells) == 2:
                qid, doc_id = cells
            elif len(cells) == 4:  # TREC: qid iter doc rel
                qid, _, doc_id, rel = cells
                if float(rel) <= 0:
                    continue
            else:
                raise ValueError(f"{path}:{lineno}: expected 2 or 4 qrels columns, got {len(cells)}")
            qrels.setdefault(qid, set()).add(doc_id)
    return qrels
