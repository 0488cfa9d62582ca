"""Score/reciprocal-rank feature fusion and the pairwise RankSVM reranker.

Each configured score source contributes two features per candidate: its
raw score and the candidate's reciprocal rank within the ranking that
source induces over the shared candidate pool (0 when the source does not
retrieve the candidate at all).

The reranker is a kernelized RankSVM: within-query (positive - negative)
difference vectors of standardized features are the training set, and the
dual of
    min 1/2 ||f||^2 + C * sum_i max(0, 1 - f(d_i))
is solved by SMO-style coordinate ascent with box constraints
0 <= alpha_i <= C, selecting the coordinate with the largest KKT violation
at each step. With an RBF kernel K(x,x) = 1, so each step is a clipped
Newton step. Candidates are scored with f(x) = sum_i alpha_i * K(d_i, x).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .runfiles import RankedItem

RANKSVM_FORMAT = "claimrank-ranksvm"
RANKSVM_VERSION = 1

DEFAULT_TOL = 1e-3
DEFAULT_MAX_STEPS = 100_000
_KERNEL_CACHE_LIMIT = 6000  # precompute the full pair kernel up to this many pairs


@dataclass(frozen=True)
class QueryContext:
    """Everything a score source may need about one query."""

    query_id: str
    text: str
    vector: np.ndarray | None = None


class ScoreSource:
    """A named scorer that can score any candidate for a query on demand.

    ``retrieval_like`` sources treat score 0 as "not retrieved": such
    candidates are absent from the induced ranking and get reciprocal
    rank 0.
    """

    name: str = ""
    retrieval_like: bool = False

    def score_candidates(self, query: QueryContext, doc_ids: Sequence[str]) -> np.ndarray:
        raise NotImplementedError

    def global_ranking(self, query: QueryContext) -> list[str]:
        """Doc ids of this source's full-database ranking (for
        rr_scope="global"); retrieval-like sources omit unretrieved docs."""
        raise NotImplementedError(f"source {self.name!r} provides no global ranking")


class Bm25Source(ScoreSource):
    retrieval_like = True

    def __init__(self, name: str, index):
        from . import bm25 as _bm25

        self.name = name
        self.index = index
        self._bm25 = _bm25

    def score_candidates(self, query, doc_ids):
        from .textproc import tokenize

        tokens = tokenize(query.text)
        return np.array(
            [self._bm25.bm25_score(self.index, tokens, d) for d in doc_ids], dtype=np.float64
        )

    def global_ranking(self, query):
        items = self._bm25.retrieve(self.index, query.text, top_n=self.index.doc_count)
        return [item.doc_id for item in items]


class EmbedSource(ScoreSource):
    def __init__(self, name: str, store, fieldname: str):
        self.name = name
        self.store = store
        self.fieldname = fieldname

    def score_candidates(self, query, doc_ids):
        if query.vector is None:
            raise ValueError(f"source {self.name!r} needs a query vector")
        q = np.asarray(query.vector, dtype=np.float64)
        qnorm = float(np.linalg.norm(q)) or 1.0
        scores = np.empty(len(doc_ids), dtype=np.float64)
        for i, doc_id in enumerate(doc_ids):
            vec = self.store.get(doc_id, self.fieldname).astype(np.float64)
            norm = float(np.linalg.norm(vec))
            scores[i] = 0.0 if norm == 0.0 else float(vec @ q) / (norm * qnorm)
        return scores

    def global_ranking(self, query):
        from .embed import rank_by_cosine

        if query.vector is None:
            raise ValueError(f"source {self.name!r} needs a query vector")
        n = len(self.store.field_matrix(self.fieldname)[0])
        return [item.doc_id for item in rank_by_cosine(query.vector, self.store, self.fieldname, max(n, 1))]


class MlpSource(ScoreSource):
    def __init__(self, name: str, model, store, n: int):
        self.name = name
        self.model = model
        self.store = store
        self.n = n

    def score_candidates(self, query, doc_ids):
        from .embed import sentence_score_matrix

        if query.vector is None:
            raise ValueError(f"source {self.name!r} needs a query vector")
        _, features = sentence_score_matrix(query.vector, self.store, self.n, doc_ids=list(doc_ids))
        return np.asarray(self.model.predict(features), dtype=np.float64)

    def global_ranking(self, query):
        from .embed import sentence_score_matrix

        if query.vector is None:
            raise ValueError(f"source {self.name!r} needs a query vector")
        doc_ids, features = sentence_score_matrix(query.vector, self.store, self.n)
        probs = np.asarray(self.model.predict(features), dtype=np.float64)
        order = sorted(range(len(doc_ids)), key=lambda i: (-probs[i], doc_ids[i]))
        return [doc_ids[i] for i in order]


def _pool_reciprocal_ranks(doc_ids: Sequence[str], scores: np.ndarray, retrieval_like: bool) -> np.ndarray:
    """1/rank within the pool ranking (score desc, doc id asc); absent -> 0."""
    present = scores > 0.0 if retrieval_like else np.ones(len(doc_ids), dtype=bool)
    order = sorted(
        (i for i in range(len(doc_ids)) if present[i]),
        key=lambda i: (-scores[i], doc_ids[i]),
    )
    rr = np.zeros(len(doc_ids), dtype=np.float64)
    for rank, i in enumerate(order, start=1):
        rr[i] = 1.0 / rank
    return rr


def candidate_features(
    query: QueryContext,
    doc_ids: Sequence[str],
    sources: Sequence[ScoreSource],
    rr_scope: str = "pool",
    global_rankings: dict[str, Sequence[str]] | None = None,
) -> np.ndarray:
    """One row per candidate: (score, reciprocal rank) per source, fixed order.

    rr_scope "pool" ranks the shared candidate pool per source; "global"
    takes ranks from the source's full-database ranking (supplied per
    source in ``global_rankings`` or computed via source.global_ranking).
    """
    if rr_scope not in ("pool", "global"):
        raise ValueError(f"unknown rr_scope {rr_scope!r}")
    features = np.zeros((len(doc_ids), 2 * len(sources)), dtype=np.float64)
    for s_idx, source in enumerate(sources):
        scores = np.asarray(source.score_candidates(query, doc_ids), dtype=np.float64)
        if scores.shape != (len(doc_ids),):
            raise ValueError(f"source {source.name!r} returned {scores.shape} scores")
        if rr_scope == "pool":
            rr = _pool_reciprocal_ranks(doc_ids, scores, source.retrieval_like)
        else:
            if global_rankings is not None and source.name in global_rankings:
                ranking = global_rankings[source.name]
            else:
                ranking = source.global_ranking(query)
            positions = {d: r for r, d in enumerate(ranking, start=1)}
            rr = np.array([1.0 / positions[d] if d in positions else 0.0 for d in doc_ids])
        features[:, 2 * s_idx] = scores
        features[:, 2 * s_idx + 1] = rr
    return features


def feature_names(sources: Sequence[ScoreSource]) -> list[str]:
    names = []
    for s in sources:
        names.extend([f"{s.name}:score", f"{s.name}:rr"])
    return names


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2); 1.0 at zero distance."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    diff = a - b
    return float(np.exp(-gamma * np.dot(diff, diff)))


def _rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class Standardizer:
    """Per-feature (mean, std) fitted on training features; std 0 -> 1 so
    constant features standardize to 0 and contribute nothing."""

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds = np.where(stds > 0.0, stds, 1.0)
        return cls(means=means, stds=stds)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds


@dataclass(frozen=True)
class RerankConfig:
    depth: int = 50
    gamma: float | None = None  # None -> 1 / feature_count
    c: float = 1.0
    tol: float = DEFAULT_TOL
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.c <= 0:
            raise ValueError(f"C must be > 0, got {self.c}")


@dataclass(frozen=True)
class TrainingList:
    """One query's candidate pool: features row-aligned with binary labels."""

    query_id: str
    features: np.ndarray
    labels: np.ndarray


@dataclass
class RankSvmModel:
    support: np.ndarray  # standardized difference vectors with alpha > 0
    alphas: np.ndarray
    gamma: float
    c: float
    standardizer: Standardizer
    source_names: tuple[str, ...]
    converged: bool = True
    steps: int = 0
    final_max_violation: float = 0.0

    def decision_scores(self, raw_features: np.ndarray) -> np.ndarray:
        Z = self.standardizer.transform(np.atleast_2d(raw_features))
        if Z.shape[1] != self.support.shape[1]:
            raise ValueError(f"feature length {Z.shape[1]} != model dimension {self.support.shape[1]}")
        if self.support.shape[0] == 0:
            return np.zeros(Z.shape[0])
        return self.alphas @ _rbf_matrix(self.support, Z, self.gamma)


def _difference_vectors(lists: Sequence[TrainingList], standardizer: Standardizer) -> np.ndarray:
    diffs = []
    for tl in lists:
        y = np.asarray(tl.labels)
        pos = np.where(y == 1)[0]
        neg = np.where(y == 0)[0]
        if len(pos) == 0 or len(neg) == 0:
            continue
        Z = standardizer.transform(tl.features)
        for p in pos:
            diffs.append(Z[p] - Z[neg])
    if not diffs:
        raise ValueError("no trainable pairs: no query has both a positive and a negative candidate")
    return np.vstack(diffs)


def train_ranksvm(
    lists: Sequence[TrainingList],
    config: RerankConfig = RerankConfig(),
    source_names: Sequence[str] = (),
) -> RankSvmModel:
    """Fit the dual on within-query difference vectors.

    Pairs never cross queries. Convergence means the largest KKT violation
    has dropped below tol; hitting the step cap first is reported via the
    model diagnostics (and a warning), not an exception.
    """
    if not lists:
        raise ValueError("no training lists")
    all_features = np.vstack([tl.features for tl in lists])
    standardizer = Standardizer.fit(all_features)
    D = _difference_vectors(lists, standardizer)
    n, dim = D.shape
    gamma = config.gamma if config.gamma is not None else 1.0 / dim

    kernel = _rbf_matrix(D, D, gamma) if n <= _KERNEL_CACHE_LIMIT else None

    alphas = np.zeros(n)
    f = np.zeros(n)  # f[i] = sum_j alpha_j K(d_j, d_i)
    c = config.c
    steps = 0
    converged = False
    max_violation = np.inf
    while steps < config.max_steps:
        # working-set selection: the coordinate with the largest KKT violation
        grad = 1.0 - f
        violation = np.where(
            grad > 0.0,
            np.where(alphas < c, grad, 0.0),
            np.where(alphas > 0.0, -grad, 0.0),
        )
        i = int(np.argmax(violation))  # first index on ties: deterministic
        max_violation = float(violation[i])
        if max_violation < config.tol:
            converged = True
            break
        steps += 1
        alpha_new = min(max(alphas[i] + grad[i], 0.0), c)  # K_ii == 1
        delta = alpha_new - alphas[i]
        if delta != 0.0:
            row = kernel[i] if kernel is not None else _rbf_matrix(D[i : i + 1], D, gamma)[0]
            f += delta * row
            alphas[i] = alpha_new
    if not converged:
        warnings.warn(
            f"RankSVM did not converge within {config.max_steps} steps "
            f"(max KKT violation {max_violation:.3g})",
            stacklevel=2,
        )

    keep = alphas > 1e-12
    return RankSvmModel(
        support=D[keep],
        alphas=alphas[keep],
        gamma=gamma,
        c=config.c,
        standardizer=standardizer,
        source_names=tuple(source_names),
        converged=converged,
        steps=steps,
        final_max_violation=max_violation,
    )


def pair_margins(model: RankSvmModel, lists: Sequence[TrainingList]) -> np.ndarray:
    """f(x+) - f(x-) for every within-query (positive, negative) pair."""
    margins = []
    for tl in lists:
        scores = model.decision_scores(tl.features)
        y = np.asarray(tl.labels)
        for p in np.where(y == 1)[0]:
            for ng in np.where(y == 0)[0]:
                margins.append(scores[p] - scores[ng])
    return np.array(margins)


def rerank(
    model: RankSvmModel,
    query: QueryContext,
    base_list: Sequence[RankedItem],
    sources: Sequence[ScoreSource],
    depth: int | None = None,
    rr_scope: str = "pool",
) -> list[RankedItem]:
    """Reorder the top-``depth`` prefix of the base ranking by model score.

    Candidates beyond the depth keep their base order after the reranked
    prefix, so full-list metrics remain computable. The output is always a
    permutation of the input.
    """
    names = tuple(s.name for s in sources)
    if model.source_names and names != model.source_names:
        raise ValueError(f"source mismatch: model trained with {model.source_names}, got {names}")
    if depth is None:
        depth = len(base_list)
    head = list(base_list[:depth])
    tail = list(base_list[depth:])
    if not head:
        return []
    doc_ids = [item.doc_id for item in head]
    features = candidate_features(query, doc_ids, sources, rr_scope=rr_scope)
    scores = model.decision_scores(features)
    order = sorted(range(len(head)), key=lambda i: (-scores[i], doc_ids[i]))
    out = [
        RankedItem(doc_id=doc_ids[i], score=float(scores[i]), rank=pos + 1)
        for pos, i in enumerate(order)
    ]
    for offset, item in enumerate(tail):
        out.append(RankedItem(doc_id=item.doc_id, score=item.score, rank=len(head) + offset + 1))
    return out


def grid_search_ranksvm(
    train_lists: Sequence[TrainingList],
    val_lists: Sequence[TrainingList],
    gammas: Sequence[float],
    cs: Sequence[float],
    base_config: RerankConfig = RerankConfig(),
    source_names: Sequence[str] = (),
):
    """Pick (gamma, C) by MRR of the reranked validation lists.

    Returns (best_model, best_gamma, best_c, results) where results maps
    (gamma, c) -> validation MRR.
    """
    results: dict[tuple[float, float], float] = {}
    best = None
    for gamma in gammas:
        for c in cs:
            config = RerankConfig(
                depth=base_config.depth, gamma=gamma, c=c,
                tol=base_config.tol, max_steps=base_config.max_steps,
            )
            model = train_ranksvm(train_lists, config, source_names)
            rrs = []
            for tl in val_lists:
                scores = model.decision_scores(tl.features)
                order = np.argsort(-scores, kind="stable")
                ranked_labels = np.asarray(tl.labels)[order]
                hits = np.where(ranked_labels == 1)[0]
                rrs.append(1.0 / (hits[0] + 1) if len(hits) else 0.0)
            mrr = float(np.mean(rrs)) if rrs else 0.0
            results[(gamma, c)] = mrr
            if best is None or mrr > best[0]:
                best = (mrr, gamma, c, model)
    assert best is not None
    return best[3], best[1], best[2], results


def save_ranksvm(model: RankSvmModel, path) -> None:
    payload = {
        "format": RANKSVM_FORMAT,
        "version": RANKSVM_VERSION,
        "support": model.support.tolist(),
        "alphas": model.alphas.tolist(),
        "gamma": model.gamma,
        "c": model.c,
        "means": model.standardizer.means.tolist(),
        "stds": model.standardizer.stds.tolist(),
        "source_names": list(model.source_names),
        "converged": model.converged,
        "steps": model.steps,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)


def load_ranksvm(path) -> RankSvmModel:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != RANKSVM_FORMAT:
        raise ValueError(f"{path}: not a {RANKSVM_FORMAT} file")
    if payload.get("version") != RANKSVM_VERSION:
        raise ValueError(f"{path}: unsupported model version {payload.get('version')!r}")
    support = np.array(payload["support"], dtype=np.float64)
    if support.ndim == 1:
        support = support.reshape(0, len(payload["means"]))
    return RankSvmModel(
        support=support,
        alphas=np.array(payload["alphas"], dtype=np.float64),
        gamma=float(payload["gamma"]),
        c=float(payload["c"]),
        standardizer=Standardizer(
            means=np.array(payload["means"], dtype=np.float64),
            stds=np.array(payload["stds"], dtype=np.float64),
        ),
        source_names=tuple(payload["source_names"]),
        converged=bool(payload.get("converged", True)),
        steps=int(payload.get("steps", 0)),
    )
