"""Pipeline configuration and the engine that wires all stages together.

The config is a flat key = value text file (``#`` comments allowed);
relative paths are resolved against the config file's directory, and
command-line overrides win over file values. The engine loads the dataset
once, builds indexes/stores/models lazily, and is immutable afterwards:
ranking and serving never mutate shared state.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import bm25 as bm25_mod
from .article_scorer import load_mlp
from .corpus import Dataset, load_dataset, load_manifest
from .embed import (
    FIELD_INPUT,
    EmbeddingStore,
    build_hash_store,
    hash_embed,
    import_vectors,
    sentence_score_matrix,
)
from .rerank import (
    Bm25Source,
    EmbedSource,
    MlpSource,
    QueryContext,
    ScoreSource,
    load_ranksvm,
    rerank as rerank_list,
)
from .runfiles import RankedItem


class ConfigError(ValueError):
    """Bad pipeline configuration value or key."""


class PrerequisiteError(RuntimeError):
    """A required artifact (model, vector file, index) is missing."""


DEFAULT_SOURCES = ("ir:title", "ir:verclaim", "ir:body", "mlp")
STAGES = ("bm25", "embed", "mlp", "rerank")


@dataclass(frozen=True)
class PipelineConfig:
    manifest: Path | None = None
    k1: float = 1.2
    b: float = 0.75
    base_field: str = "body"
    combine: str = "concat"
    vectors: Path | None = None
    query_vectors: Path | None = None
    embed_dim: int = 256
    embed_field: str = "verclaim"
    scorer_n: int = 4
    scorer_model: Path | None = None
    rerank_model: Path | None = None
    rerank_depth: int = 50
    gamma: float | None = None
    c: float = 1.0
    sources: tuple[str, ...] = DEFAULT_SOURCES
    rr_scope: str = "pool"
    map_cutoffs: tuple = (1, 3, 5, 10, 20, None)
    hp_cutoffs: tuple = (1, 3, 5, 10, 20, 50)
    seed: int = 0
    epochs: int = 15
    batch_size: int = 2048
    learning_rate: float = 1e-3
    negative_sample_rate: float | None = None
    max_body_sentences: int | None = None
    tag: str = "claimrank"

    def validate(self) -> None:
        if self.manifest is None:
            raise ConfigError("config needs a 'manifest' path")
        if not Path(self.manifest).exists():
            raise FileNotFoundError(f"manifest not found: {self.manifest}")
        for name in ("vectors", "query_vectors"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{name} file not found: {p}")
        if self.combine not in ("concat", "sum"):
            raise ConfigError(f"combine must be concat or sum, got {self.combine!r}")
        if self.rr_scope not in ("pool", "global"):
            raise ConfigError(f"rr_scope must be pool or global, got {self.rr_scope!r}")
        if self.rerank_depth < 1:
            raise ConfigError("rerank_depth must be >= 1")
        if self.embed_dim < 8:
            raise ConfigError("embed_dim must be >= 8")


_PATH_KEYS = {"manifest", "vectors", "query_vectors", "scorer_model", "rerank_model"}
_INT_KEYS = {"embed_dim", "scorer_n", "rerank_depth", "seed", "epochs", "batch_size",
             "max_body_sentences"}
_FLOAT_KEYS = {"k1", "b", "gamma", "c", "learning_rate", "negative_sample_rate"}
_STR_KEYS = {"base_field", "combine", "embed_field", "rr_scope", "tag"}
_LIST_KEYS = {"sources", "map_cutoffs", "hp_cutoffs"}
_OPTIONAL_KEYS = {"gamma", "negative_sample_rate", "max_body_sentences",
                  "vectors", "query_vectors", "scorer_model", "rerank_model", "manifest"}
KNOWN_KEYS = _PATH_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_KEYS


def _parse_value(key: str, raw: str, base_dir: Path):
    value = raw.strip().strip('"').strip("'")
    if value == "" or value.lower() == "none":
        if key in _OPTIONAL_KEYS:
            return None
        raise ConfigError(f"key {key!r} needs a value")
    if key in _PATH_KEYS:
        p = Path(value)
        return p if p.is_absolute() else base_dir / p
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _LIST_KEYS:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if key == "sources":
            return tuple(items)
        return tuple(None if v == "all" else int(v) for v in items)
    return value


def load_config(path, overrides: Mapping[str, str] | None = None) -> PipelineConfig:
    """Parse the key = value config file and apply overrides (flags win)."""
    path = Path(path)
    values: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            if key not in KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(key, value, path.parent)
    values.update(_parse_overrides(overrides))
    return PipelineConfig(**values)


def _parse_overrides(overrides: Mapping[str, str] | None) -> dict[str, object]:
    values: dict[str, object] = {}
    for key, value in (overrides or {}).items():
        key = key.strip().lower()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, value, Path.cwd())
    return values


def config_from_overrides(overrides: Mapping[str, str] | None) -> PipelineConfig:
    """Config with no file behind it: defaults plus overrides."""
    return PipelineConfig(**_parse_overrides(overrides))


class Engine:
    """Loads artifacts per the config and answers ranking queries.

    All heavyweight state (dataset, indexes, embedding store, models) is
    built lazily, cached, and never mutated afterwards, so concurrent
    readers are safe.
    """

    def __init__(self, config: PipelineConfig):
        config.validate()
        self.config = config
        self._dataset: Dataset | None = None
        self._indexes: dict[str, bm25_mod.InvertedIndex] = {}
        self._store: EmbeddingStore | None = None
        self._query_store: EmbeddingStore | None = None
        self._mlp = None
        self._ranksvm = None
        self._sources: dict[tuple[str, ...], list[ScoreSource]] = {}

    # -- artifacts ---------------------------------------------------------

    @property
    def dataset(self) -> Dataset:
        if self._dataset is None:
            self._dataset = load_dataset(load_manifest(self.config.manifest))
        return self._dataset

    def index(self, field_name: str) -> bm25_mod.InvertedIndex:
        spec = bm25_mod.FieldSpec.parse(field_name)
        if spec.name not in self._indexes:
            self._indexes[spec.name] = bm25_mod.build_index(
                self.dataset.claims, spec, k1=self.config.k1, b=self.config.b
            )
        return self._indexes[spec.name]

    @property
    def store(self) -> EmbeddingStore:
        if self._store is None:
            if self.config.vectors is not None:
                self._store = import_vectors(self.config.vectors)
            else:
                self._store = build_hash_store(
                    self.dataset.claims,
                    dim=self.config.embed_dim,
                    max_body_sentences=self.config.max_body_sentences,
                )
        return self._store

    def query_vector(self, query_id: str, text: str) -> np.ndarray:
        """Imported query vector when available, else the hash embedder."""
        if self.config.query_vectors is not None:
            if self._query_store is None:
                self._query_store = import_vectors(self.config.query_vectors, expected_dim=self.store.dim)
            if self._query_store.has(query_id, FIELD_INPUT):
                return self._query_store.get(query_id, FIELD_INPUT).astype(np.float64)
        return hash_embed(text, self.store.dim)

    @property
    def mlp(self):
        if self._mlp is None:
            if self.config.scorer_model is None or not Path(self.config.scorer_model).exists():
                raise PrerequisiteError(
                    "article-scorer model missing; train it first with: claimrank train mlp"
                )
            self._mlp = load_mlp(self.config.scorer_model)
        return self._mlp

    @property
    def ranksvm(self):
        if self._ranksvm is None:
            if self.config.rerank_model is None or not Path(self.config.rerank_model).exists():
                raise PrerequisiteError(
                    "rerank model missing; train it first with: claimrank train rerank"
                )
            self._ranksvm = load_ranksvm(self.config.rerank_model)
        return self._ranksvm

    def build_sources(self, names: Sequence[str] | None = None) -> list[ScoreSource]:
        names = tuple(names if names is not None else self.config.sources)
        if names not in self._sources:
            sources: list[ScoreSource] = []
            for name in names:
                kind, _, arg = name.partition(":")
                if kind == "ir":
                    sources.append(Bm25Source(name, self.index(arg or self.config.base_field)))
                elif kind == "embed":
                    sources.append(EmbedSource(name, self.store, arg or self.config.embed_field))
                elif kind == "mlp":
                    sources.append(MlpSource(name, self.mlp, self.store, self.config.scorer_n))
                else:
                    raise ConfigError(f"unknown source {name!r}")
            self._sources[names] = sources
        return self._sources[names]

    # -- ranking -----------------------------------------------------------

    def _query_context(self, query_id: str, text: str) -> QueryContext:
        return QueryContext(query_id=query_id, text=text, vector=self.query_vector(query_id, text))

    def _rank_mlp(self, ctx: QueryContext, top_k: int) -> list[RankedItem]:
        doc_ids, features = sentence_score_matrix(ctx.vector, self.store, self.config.scorer_n)
        probs = self.mlp.predict(features)
        order = sorted(range(len(doc_ids)), key=lambda i: (-probs[i], doc_ids[i]))[:top_k]
        return [
            RankedItem(doc_id=doc_ids[i], score=float(probs[i]), rank=pos + 1)
            for pos, i in enumerate(order)
        ]

    def rank(self, query_id: str, text: str, stage: str, top_k: int) -> list[RankedItem]:
        """Rank the database for one query at the requested stage.

        Stage strings: "bm25", "embed", "mlp", "rerank", optionally with a
        field after a colon, e.g. "bm25:title+verclaim" or "embed:title".
        """
        if not text or not text.strip():
            raise ValueError("empty query text")
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        kind, _, arg = stage.partition(":")
        if kind not in STAGES:
            raise ValueError(f"unknown stage {stage!r} (expected one of {', '.join(STAGES)})")

        if kind == "bm25":
            field_name = arg or self.config.base_field
            if self.config.combine == "sum" and "+" in field_name:
                parts = field_name.split("+")
                return bm25_mod.retrieve_score_sum(
                    [self.index(p) for p in parts], text, top_n=top_k
                )
            return bm25_mod.retrieve(self.index(field_name), text, top_n=top_k)

        ctx = self._query_context(query_id, text)
        if kind == "embed":
            from .embed import rank_by_cosine

            return rank_by_cosine(ctx.vector, self.store, arg or self.config.embed_field, top_n=top_k)
        if kind == "mlp":
            return self._rank_mlp(ctx, top_k)

        # rerank: reorder the base IR run's top-N, keep the tail
        depth = self.config.rerank_depth
        base = bm25_mod.retrieve(self.index(self.config.base_field), text, top_n=max(depth, top_k))
        model = self.ranksvm
        sources = self.build_sources(model.source_names or None)
        out = rerank_list(model, ctx, base, sources, depth=depth, rr_scope=self.config.rr_scope)
        return out[:top_k]

    def rank_with_source_scores(self, query_id: str, text: str, stage: str, top_k: int):
        """rank() plus a per-candidate breakdown of raw source scores."""
        items = self.rank(query_id, text, stage, top_k)
        if not items:
            return items, {}
        doc_ids = [it.doc_id for it in items]
        breakdown: dict[str, dict[str, float]] = {d: {} for d in doc_ids}
        kind = stage.partition(":")[0]
        if kind == "rerank":
            ctx = self._query_context(query_id, text)
            sources = self.build_sources(self.ranksvm.source_names or None)
            for source in sources:
                scores = source.score_candidates(ctx, doc_ids)
                for d, s in zip(doc_ids, scores):
                    breakdown[d][source.name] = float(s)
        else:
            label = stage if ":" in stage else (
                f"{kind}:{self.config.base_field}" if kind == "bm25"
                else f"{kind}:{self.config.embed_field}" if kind == "embed" else kind
            )
            for it in items:
                breakdown[it.doc_id][label] = it.score
        return items, breakdown

    def batch_rank(self, queries: Sequence[tuple[str, str]], stage: str, top_k: int):
        run: dict[str, list[RankedItem]] = {}
        for query_id, text in queries:
            run[query_id] = self.rank(query_id, text, stage, top_k)
        return run

    # -- training orchestration ---------------------------------------------

    def train_article_scorer(self, out_path, log_path=None) -> None:
        from .article_scorer import TrainConfig, generate_training_pairs, save_mlp, train_mlp, write_train_log

        dataset = self.dataset
        inputs = sorted(dataset.train_pairs.inputs, key=lambda inp: inp.id)
        X, y, _ = generate_training_pairs(
            inputs,
            dataset.claims,
            self.store,
            dataset.train_pairs,
            n=self.config.scorer_n,
            query_vec_fn=lambda inp: self.query_vector(inp.id, inp.text),
            negative_sample_rate=self.config.negative_sample_rate,
            seed=self.config.seed,
        )
        config = TrainConfig(
            epochs=self.config.epochs,
            batch_size=self.config.batch_size,
            learning_rate=self.config.learning_rate,
            seed=self.config.seed,
        )
        result = train_mlp(X, y, config)
        save_mlp(result.model, out_path, config=config)
        if log_path is not None:
            write_train_log(result.log, log_path)

    def train_reranker(self, out_path) -> None:
        from .rerank import RerankConfig, TrainingList, candidate_features, save_ranksvm, train_ranksvm

        dataset = self.dataset
        qrels = dataset.train_pairs.qrels()
        sources = self.build_sources()
        lists = []
        for inp in sorted(dataset.train_pairs.inputs, key=lambda i: i.id):
            base = bm25_mod.retrieve(
                self.index(self.config.base_field), inp.text, top_n=self.config.rerank_depth
            )
            if not base:
                continue
            doc_ids = [it.doc_id for it in base]
            ctx = self._query_context(inp.id, inp.text)
            features = candidate_features(ctx, doc_ids, sources, rr_scope=self.config.rr_scope)
            labels = np.array([1 if d in qrels.get(inp.id, set()) else 0 for d in doc_ids])
            lists.append(TrainingList(query_id=inp.id, features=features, labels=labels))
        config = RerankConfig(
            depth=self.config.rerank_depth, gamma=self.config.gamma, c=self.config.c
        )
        model = train_ranksvm(lists, config, source_names=[s.name for s in sources])
        save_ranksvm(model, out_path)

    def test_queries(self) -> list[tuple[str, str]]:
        return sorted((inp.id, inp.text) for inp in self.dataset.test_pairs.inputs)

    def test_qrels(self) -> dict[str, set[str]]:
        return self.dataset.test_pairs.qrels()
