"""Ranking metrics: MRR, MAP@k, HasPositives@k, and report tables.

All metrics are macro-averaged over queries. Relevant documents missing
from a ranking count as rank infinity and contribute nothing. MAP@k
normalizes by min(|relevant|, k) by default, so a perfect top-k ranking
scores 1.0; the plain |relevant| normalizer is available via
``normalizer="relevant"``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .runfiles import RankedItem

DEFAULT_MAP_CUTOFFS: tuple[int | None, ...] = (1, 3, 5, 10, 20, None)
DEFAULT_HP_CUTOFFS: tuple[int, ...] = (1, 3, 5, 10, 20, 50)


def _doc_ids(ranking: Sequence) -> list[str]:
    return [item.doc_id if isinstance(item, RankedItem) else item for item in ranking]


def reciprocal_rank(ranking: Sequence, relevant: set[str]) -> float:
    """1/rank of the first relevant doc; 0.0 if none is retrieved."""
    for i, doc_id in enumerate(_doc_ids(ranking), start=1):
        if doc_id in relevant:
            return 1.0 / i
    return 0.0


def average_precision_at_k(
    ranking: Sequence,
    relevant: set[str],
    k: int | None = None,
    normalizer: str = "min",
) -> float:
    """Average precision truncated at rank k (k=None means untruncated)."""
    if k is not None and k < 1:
        raise ValueError(f"k must be >= 1 or None, got {k}")
    if normalizer not in ("min", "relevant"):
        raise ValueError(f"unknown normalizer {normalizer!r}")
    if not relevant:
        return 0.0
    docs = _doc_ids(ranking)
    if k is not None:
        docs = docs[:k]
    hits = 0
    precision_sum = 0.0
    for i, doc_id in enumerate(docs, start=1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / i
    if normalizer == "min" and k is not None:
        denom = min(len(relevant), k)
    else:
        denom = len(relevant)
    return precision_sum / denom


def has_positives_at_k(ranking: Sequence, relevant: set[str], k: int) -> int:
    """1 iff any of the top-k docs is relevant."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return int(any(doc_id in relevant for doc_id in _doc_ids(ranking)[:k]))


@dataclass(frozen=True)
class QueryMetrics:
    reciprocal_rank: float
    map_at: dict[int | None, float]
    has_positives_at: dict[int, float]


@dataclass
class MetricReport:
    mrr: float
    map_at: dict[int | None, float]
    has_positives_at: dict[int, float]
    per_query: dict[str, QueryMetrics]
    num_queries: int
    missing_queries: list[str] = field(default_factory=list)


def evaluate_run(
    run: Mapping[str, Sequence],
    qrels: Mapping[str, set[str]],
    map_cutoffs: Sequence[int | None] = DEFAULT_MAP_CUTOFFS,
    hp_cutoffs: Sequence[int] = DEFAULT_HP_CUTOFFS,
    normalizer: str = "min",
    known_doc_ids: set[str] | None = None,
) -> MetricReport:
    """Macro-average the metrics over every qrels query.

    Queries missing from the run contribute 0 to every mean (with a
    warning). If known_doc_ids is given, every relevant doc must be in it.
    """
    if not qrels:
        raise ValueError("empty qrels")
    if known_doc_ids is not None:
        for qid, rel in qrels.items():
            unknown = rel - known_doc_ids
            if unknown:
                raise ValueError(
                    f"qrels for query {qid!r} reference doc ids missing from the corpus: "
                    f"{sorted(unknown)[:3]}"
                )
    missing = [qid for qid in qrels if qid not in run]
    if missing:
        warnings.warn(
            f"{len(missing)} qrels query/queries missing from the run contribute 0 to all means",
            stacklevel=2,
        )

    per_query: dict[str, QueryMetrics] = {}
    for qid in qrels:
        ranking = run.get(qid, ())
        rel = qrels[qid]
        per_query[qid] = QueryMetrics(
            reciprocal_rank=reciprocal_rank(ranking, rel),
            map_at={k: average_precision_at_k(ranking, rel, k, normalizer) for k in map_cutoffs},
            has_positives_at={k: float(has_positives_at_k(ranking, rel, k)) for k in hp_cutoffs},
        )

    n = len(qrels)
    return MetricReport(
        mrr=sum(m.reciprocal_rank for m in per_query.values()) / n,
        map_at={k: sum(m.map_at[k] for m in per_query.values()) / n for k in map_cutoffs},
        has_positives_at={
            k: sum(m.has_positives_at[k] for m in per_query.values()) / n for k in hp_cutoffs
        },
        per_query=per_query,
        num_queries=n,
        missing_queries=missing,
    )


def _fmt(value: float) -> str:
    s = f"{value:.3f}"
    return s[1:] if s.startswith("0.") else s


def format_report_table(reports: Mapping[str, MetricReport]) -> str:
    """Aligned text table: one row per run, MRR / MAP@k / HasPositives@k columns."""
    if not reports:
        raise ValueError("no reports to format")
    first = next(iter(reports.values()))
    map_keys = list(first.map_at)
    hp_keys = list(first.has_positives_at)
    header = (
        ["Experiment", "MRR"]
        + [f"MAP@{'all' if k is None else k}" for k in map_keys]
        + [f"HasPositives@{k}" for k in hp_keys]
    )
    rows = [header]
    for label, report in reports.items():
        rows.append(
            [label, _fmt(report.mrr)]
            + [_fmt(report.map_at[k]) for k in map_keys]
            + [_fmt(report.has_positives_at[k]) for k in hp_keys]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def report_to_csv(reports: Mapping[str, MetricReport]) -> str:
    """Machine-readable companion of the text table."""
    if not reports:
        raise ValueError("no reports to format")
    first = next(iter(reports.values()))
    map_keys = list(first.map_at)
    hp_keys = list(first.has_positives_at)
    header = (
        ["experiment", "mrr"]
        + [f"map@{'all' if k is None else k}" for k in map_keys]
        + [f"has_positives@{k}" for k in hp_keys]
    )
    lines = [",".join(header)]
    for label, report in reports.items():
        cells = [label, f"{report.mrr:.6f}"]
        cells += [f"{report.map_at[k]:.6f}" for k in map_keys]
        cells += [f"{report.has_positives_at[k]:.6f}" for k in hp_keys]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
