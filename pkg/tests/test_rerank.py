import math

import numpy as np
import pytest

from claimrank.bm25 import build_index
from claimrank.corpus import VerifiedClaim, VerifiedClaimStore
from claimrank.embed import EmbeddingStore
from claimrank.rerank import (
    Bm25Source,
    EmbedSource,
    QueryContext,
    RankSvmModel,
    RerankConfig,
    ScoreSource,
    Standardizer,
    TrainingList,
    candidate_features,
    feature_names,
    grid_search_ranksvm,
    load_ranksvm,
    pair_margins,
    rbf_kernel,
    rerank,
    save_ranksvm,
    train_ranksvm,
)
from claimrank.runfiles import RankedItem


class FixedSource(ScoreSource):
    """Test double: returns canned scores per doc id."""

    def __init__(self, name, table, retrieval_like=False):
        self.name = name
        self.table = table
        self.retrieval_like = retrieval_like

    def score_candidates(self, query, doc_ids):
        return np.array([self.table[d] for d in doc_ids], dtype=np.float64)


class TestRbfKernel:
    def test_zero_distance(self):
        assert rbf_kernel([1.0, 2.0], [1.0, 2.0], gamma=0.5) == 1.0

    def test_hand_value(self):
        assert rbf_kernel([0.0], [1.0], gamma=1.0) == pytest.approx(0.367879, abs=1e-6)
        assert rbf_kernel([0.0], [1.0], gamma=1.0) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_large_gamma_vanishes(self):
        assert rbf_kernel([0.0, 0.0], [1.0, 1.0], gamma=1e6) == pytest.approx(0.0, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rbf_kernel([1.0], [1.0, 2.0], gamma=1.0)

    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            rbf_kernel([0.0], [1.0], gamma=0.0)


class TestCandidateFeatures:
    def test_rank_one_gives_rr_one(self):
        src = FixedSource("s", {"a": 5.0, "b": 3.0, "c": 1.0})
        query = QueryContext(query_id="q", text="t")
        feats = candidate_features(query, ["a", "b", "c"], [src])
        assert feats[0, 1] == 1.0  # a ranked first

    def test_rank_three_gives_one_third(self):
        src = FixedSource("s", {"a": 5.0, "b": 3.0, "c": 1.0})
        feats = candidate_features(QueryContext("q", "t"), ["a", "b", "c"], [src])
        assert feats[2, 1] == pytest.approx(1.0 / 3.0)

    def test_four_sources_give_eight_features(self):
        sources = [FixedSource(f"s{i}", {"a": 1.0, "b": 2.0}) for i in range(4)]
        feats = candidate_features(QueryContext("q", "t"), ["a", "b"], sources)
        assert feats.shape == (2, 8)
        assert len(feature_names(sources)) == 8

    def test_five_sources_give_ten_features(self):
        sources = [FixedSource(f"s{i}", {"a": 1.0}) for i in range(5)]
        feats = candidate_features(QueryContext("q", "t"), ["a"], sources)
        assert feats.shape == (1, 10)

    def test_zero_score_retrieval_source_gets_rr_zero_but_keeps_raw_score(self):
        src = FixedSource("ir", {"a": 2.0, "b": 0.0}, retrieval_like=True)
        feats = candidate_features(QueryContext("q", "t"), ["a", "b"], [src])
        assert feats[1, 0] == 0.0  # raw score as computed
        assert feats[1, 1] == 0.0  # absent from induced ranking
        assert feats[0, 1] == 1.0

    def test_non_retrieval_source_ranks_everyone(self):
        src = FixedSource("embed", {"a": 0.0, "b": -0.5})
        feats = candidate_features(QueryContext("q", "t"), ["a", "b"], [src])
        assert feats[0, 1] == 1.0 and feats[1, 1] == 0.5

    def test_pool_ties_break_by_doc_id(self):
        src = FixedSource("s", {"b": 1.0, "a": 1.0})
        feats = candidate_features(QueryContext("q", "t"), ["b", "a"], [src])
        assert feats[1, 1] == 1.0  # "a" wins the tie
        assert feats[0, 1] == 0.5

    def test_global_scope_uses_supplied_ranking(self):
        src = FixedSource("s", {"a": 1.0, "b": 2.0})
        feats = candidate_features(
            QueryContext("q", "t"),
            ["a", "b"],
            [src],
            rr_scope="global",
            global_rankings={"s": ["x", "y", "b", "a"]},
        )
        assert feats[0, 1] == pytest.approx(1.0 / 4.0)
        assert feats[1, 1] == pytest.approx(1.0 / 3.0)

    def test_global_scope_without_ranking_support_raises(self):
        src = FixedSource("s", {"a": 1.0})  # test double has no global ranking
        with pytest.raises(NotImplementedError, match="global ranking"):
            candidate_features(QueryContext("q", "t"), ["a"], [src], rr_scope="global")

    def test_global_scope_computed_by_real_source(self):
        claims = VerifiedClaimStore(
            [
                VerifiedClaim(id="a", ver_claim="shared words here", title="x"),
                VerifiedClaim(id="b", ver_claim="shared words here plus padding tokens", title="y"),
                VerifiedClaim(id="c", ver_claim="unrelated entirely", title="z"),
            ]
        )
        src = Bm25Source("ir:verclaim", build_index(claims, "verclaim"))
        query = QueryContext("q", "shared words here")
        feats = candidate_features(query, ["b", "c"], [src], rr_scope="global")
        # "a" outranks "b" globally, so b's global reciprocal rank is 1/2;
        # "c" is never retrieved and gets 0
        assert feats[0, 1] == pytest.approx(0.5)
        assert feats[1, 1] == 0.0

    def test_real_sources_score_outside_their_top_n(self):
        claims = VerifiedClaimStore(
            [
                VerifiedClaim(id="a", ver_claim="tax cuts boost growth", title="x"),
                VerifiedClaim(id="b", ver_claim="walls stop nobody", title="y"),
            ]
        )
        index = build_index(claims, "verclaim")
        store = EmbeddingStore(dim=8)
        store.add(("a", "verclaim", None), np.eye(8, dtype=np.float32)[0])
        store.add(("b", "verclaim", None), np.eye(8, dtype=np.float32)[1])
        query = QueryContext("q", "tax growth", vector=np.eye(8)[0])
        sources = [Bm25Source("ir:verclaim", index), EmbedSource("embed:verclaim", store, "verclaim")]
        feats = candidate_features(query, ["a", "b"], sources)
        assert feats.shape == (2, 4)
        assert feats[0, 0] > 0.0 and feats[1, 0] == 0.0
        assert feats[0, 2] == pytest.approx(1.0)


class TestStandardizer:
    def test_constant_features_contribute_nothing(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        std = Standardizer.fit(X)
        Z = std.transform(X)
        assert np.all(Z[:, 1] == 0.0)
        assert std.stds[1] == 1.0

    def test_transform_zero_mean_unit_std(self):
        rng = np.random.default_rng(0)
        X = rng.normal(loc=3.0, scale=2.5, size=(200, 4))
        Z = Standardizer.fit(X).transform(X)
        assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(Z.std(axis=0), 1.0, atol=1e-12)


def separable_lists(n_queries=20, n_candidates=8, seed=0, signal_col=0):
    """One positive per query; its ``signal_col`` feature is ~1, negatives ~0."""
    rng = np.random.default_rng(seed)
    lists = []
    for qi in range(n_queries):
        feats = rng.uniform(0.0, 0.05, size=(n_candidates, 3))
        labels = np.zeros(n_candidates, dtype=int)
        pos = int(rng.integers(0, n_candidates))
        labels[pos] = 1
        feats[pos, signal_col] = 1.0 + rng.uniform(-0.02, 0.02)
        lists.append(TrainingList(query_id=f"q{qi}", features=feats, labels=labels))
    return lists


class TestTrainRankSvm:
    def test_margin_property_and_heldout_mrr(self):
        train_lists = separable_lists(n_queries=20, seed=1)
        heldout = separable_lists(n_queries=10, seed=2)
        model = train_ranksvm(train_lists, RerankConfig(gamma=None, c=1.0))
        assert model.converged
        assert np.all(pair_margins(model, train_lists) > 0)
        rrs = []
        for tl in heldout:
            scores = model.decision_scores(tl.features)
            order = np.argsort(-scores, kind="stable")
            first_pos = int(np.where(np.asarray(tl.labels)[order] == 1)[0][0])
            rrs.append(1.0 / (first_pos + 1))
        assert np.mean(rrs) == 1.0

    def test_no_valid_pairs_rejected(self):
        lists = [TrainingList("q", np.ones((3, 2)), np.zeros(3, dtype=int))]
        with pytest.raises(ValueError, match="no trainable pairs"):
            train_ranksvm(lists)

    def test_duplicating_a_list_keeps_its_ordering(self):
        lists = separable_lists(n_queries=6, seed=3)
        model_a = train_ranksvm(lists, RerankConfig(c=1.0))
        dup = lists + [TrainingList("dup", lists[0].features.copy(), lists[0].labels.copy())]
        model_b = train_ranksvm(dup, RerankConfig(c=1.0))
        sa = model_a.decision_scores(lists[0].features)
        sb = model_b.decision_scores(lists[0].features)
        assert list(np.argsort(-sa, kind="stable")) == list(np.argsort(-sb, kind="stable"))

    def test_dual_coefficients_within_box(self):
        lists = separable_lists(n_queries=10, seed=4)
        for c in (0.3, 1.0, 5.0):
            model = train_ranksvm(lists, RerankConfig(c=c))
            assert np.all(model.alphas >= 0.0)
            assert np.all(model.alphas <= c + 1e-12)

    def test_step_cap_reports_non_convergence(self):
        lists = separable_lists(n_queries=10, seed=5)
        with pytest.warns(UserWarning, match="did not converge"):
            model = train_ranksvm(lists, RerankConfig(max_steps=3))
        assert not model.converged
        assert model.steps == 3

    def test_gamma_defaults_to_inverse_feature_count(self):
        lists = separable_lists(n_queries=5, seed=6)  # 3 features per candidate
        model = train_ranksvm(lists, RerankConfig(gamma=None))
        assert model.gamma == pytest.approx(1.0 / 3.0)

    def test_scaling_one_raw_feature_keeps_orderings(self):
        lists = separable_lists(n_queries=8, seed=7)
        scaled = [
            TrainingList(tl.query_id, tl.features * np.array([50.0, 1.0, 1.0]), tl.labels)
            for tl in lists
        ]
        m1 = train_ranksvm(lists, RerankConfig(c=1.0))
        m2 = train_ranksvm(scaled, RerankConfig(c=1.0))
        for tl, tl_scaled in zip(lists, scaled):
            o1 = np.argsort(-m1.decision_scores(tl.features), kind="stable")
            o2 = np.argsort(-m2.decision_scores(tl_scaled.features), kind="stable")
            assert list(o1) == list(o2)


class TestRerank:
    def _base_list(self, ids_scores):
        return [RankedItem(doc_id=d, score=s, rank=i + 1) for i, (d, s) in enumerate(ids_scores)]

    def test_single_candidate_unchanged(self):
        src = FixedSource("s", {"a": 1.0})
        model = train_ranksvm(separable_lists(5, 4, seed=8, signal_col=0)[:5],
                              RerankConfig(c=1.0))
        # model trained on 3 features; rebuild a compatible one with 2 (score, rr)
        lists = [
            TrainingList("q", np.array([[1.0, 1.0], [0.0, 0.5]]), np.array([1, 0])),
            TrainingList("r", np.array([[0.9, 1.0], [0.1, 0.5]]), np.array([1, 0])),
        ]
        model = train_ranksvm(lists, RerankConfig(c=1.0), source_names=["s"])
        base = self._base_list([("a", 3.0)])
        out = rerank(model, QueryContext("q", "t"), base, [src], depth=1)
        assert [i.doc_id for i in out] == ["a"]

    def test_hand_built_model_scoring_by_rr_reproduces_base_order(self):
        # a huge std on the raw-score dimension collapses it to ~0, so the
        # model sees only the RR feature; one support vector above the
        # largest RR makes the score monotone in RR and the reranked order
        # equals the base order
        src = FixedSource("base", {"a": 9.0, "b": 5.0, "c": 1.0}, retrieval_like=True)
        means = np.zeros(2)
        stds = np.array([1e12, 1.0])
        support = np.array([[0.0, 2.0]])  # rr dimension is feature 1
        model = RankSvmModel(
            support=support,
            alphas=np.array([1.0]),
            gamma=0.3,
            c=1.0,
            standardizer=Standardizer(means=means, stds=stds),
            source_names=("base",),
        )
        base = self._base_list([("a", 9.0), ("b", 5.0), ("c", 1.0)])
        out = rerank(model, QueryContext("q", "t"), base, [src])
        assert [i.doc_id for i in out] == ["a", "b", "c"]

    def test_permuting_input_candidates_gives_identical_output(self):
        src = FixedSource("s", {"a": 3.0, "b": 2.0, "c": 1.0})
        lists = [
            TrainingList("q", np.array([[3.0, 1.0], [1.0, 0.33]]), np.array([1, 0])),
        ]
        model = train_ranksvm(lists, RerankConfig(c=1.0), source_names=["s"])
        base = self._base_list([("a", 3.0), ("b", 2.0), ("c", 1.0)])
        shuffled = [base[2], base[0], base[1]]
        out1 = rerank(model, QueryContext("q", "t"), base, [src])
        out2 = rerank(model, QueryContext("q", "t"), shuffled, [src])
        assert [i.doc_id for i in out1] == [i.doc_id for i in out2]

    def test_source_mismatch_rejected(self):
        lists = [TrainingList("q", np.array([[1.0, 1.0], [0.0, 0.5]]), np.array([1, 0]))]
        model = train_ranksvm(lists, RerankConfig(c=1.0), source_names=["expected"])
        src = FixedSource("other", {"a": 1.0})
        with pytest.raises(ValueError, match="source mismatch"):
            rerank(model, QueryContext("q", "t"), self._base_list([("a", 1.0)]), [src])

    def test_tail_beyond_depth_keeps_base_order(self):
        src = FixedSource("s", {"a": 0.1, "b": 0.9, "c": 5.0, "d": 4.0})
        lists = [TrainingList("q", np.array([[1.0, 1.0], [0.0, 0.5]]), np.array([1, 0]))]
        model = train_ranksvm(lists, RerankConfig(c=1.0), source_names=["s"])
        base = self._base_list([("a", 4.0), ("b", 3.0), ("c", 2.0), ("d", 1.0)])
        out = rerank(model, QueryContext("q", "t"), base, [src], depth=2)
        assert sorted(i.doc_id for i in out[:2]) == ["a", "b"]  # permutation of the head
        assert [i.doc_id for i in out[2:]] == ["c", "d"]  # untouched tail
        assert [i.rank for i in out] == [1, 2, 3, 4]

    def test_output_is_permutation_of_input(self):
        rng = np.random.default_rng(10)
        table = {f"d{i}": float(rng.uniform(0, 1)) for i in range(12)}
        src = FixedSource("s", table)
        lists = [TrainingList("q", np.array([[1.0, 1.0], [0.0, 0.5]]), np.array([1, 0]))]
        model = train_ranksvm(lists, RerankConfig(c=1.0), source_names=["s"])
        base = self._base_list([(d, 12.0 - i) for i, d in enumerate(table)])
        out = rerank(model, QueryContext("q", "t"), base, [src], depth=7)
        assert sorted(i.doc_id for i in out) == sorted(table)


class TestGridSearch:
    def test_grid_search_finds_working_configuration(self):
        train_lists = separable_lists(n_queries=10, seed=11)
        val_lists = separable_lists(n_queries=6, seed=12)
        model, gamma, c, results = grid_search_ranksvm(
            train_lists, val_lists, gammas=[0.05, 0.5], cs=[0.5, 2.0]
        )
        assert results[(gamma, c)] == max(results.values())
        assert results[(gamma, c)] == 1.0


class TestSerialization:
    def test_round_trip_scores_identical(self, tmp_path):
        lists = separable_lists(n_queries=8, seed=13)
        model = train_ranksvm(lists, RerankConfig(c=1.0), source_names=["a", "b"])
        path = tmp_path / "ranksvm.json"
        save_ranksvm(model, path)
        loaded = load_ranksvm(path)
        X = lists[0].features
        assert np.allclose(loaded.decision_scores(X), model.decision_scores(X), atol=0)
        assert loaded.source_names == ("a", "b")
        assert loaded.gamma == model.gamma

    def test_format_check(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text('{"format": "nope"}')
        with pytest.raises(ValueError, match="not a claimrank-ranksvm"):
            load_ranksvm(path)
