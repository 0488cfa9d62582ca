import math

import numpy as np
import pytest

from claimrank.textproc import (
    HistogramRow,
    SparseVector,
    ZeroNormWarning,
    cosine,
    similarity_histogram,
    split_sentences,
    tfidf_fit,
    tfidf_transform,
    tokenize,
    write_histogram_tsv,
)


class TestTokenize:
    def test_plain_sentence(self):
        assert tokenize("Hillary wants to give amnesty.") == ["hillary", "wants", "to", "give", "amnesty"]

    def test_empty(self):
        assert tokenize("") == []

    def test_url_placeholder(self):
        assert tokenize("https://t.co/C2p25mxWJO done") == ["URL", "done"]

    def test_mention_placeholder(self):
        assert tokenize("per @ewarren today") == ["per", "MENTION", "today"]

    def test_pic_twitter_link(self):
        assert tokenize("look pic.twitter.com/u7qqojWVlR now") == ["look", "URL", "now"]

    def test_numbers_kept(self):
        assert tokenize("raised $7.5 billion in 2016") == ["raised", "7", "5", "billion", "in", "2016"]

    def test_idempotent_under_rejoin(self):
        rng = np.random.default_rng(11)
        words = ["Alpha", "beta-2", "@who", "https://a.io/x", "No.", "plain", "URL"]
        for _ in range(200):
            text = " ".join(rng.choice(words, size=rng.integers(0, 8)))
            toks = tokenize(text)
            assert tokenize(" ".join(toks)) == toks

    def test_no_empty_tokens(self):
        assert all(tokenize("  ... a  --  b !! ")), "tokens must be non-empty"


class TestTfidf:
    def test_single_doc_corpus_weights_are_raw_tf(self):
        # idf = ln(2/2) + 1 = 1.0 for every term seen in the only doc
        model = tfidf_fit(["big cats and small cats"])
        vec = tfidf_transform(model, "big cats and small cats")
        assert vec.entries == {"big": 1.0, "cats": 2.0, "and": 1.0, "small": 1.0}

    def test_term_in_every_doc_of_four(self):
        # idf = ln(5/5) + 1 = 1.0
        model = tfidf_fit(["x a", "x b", "x c", "x d"])
        assert tfidf_transform(model, "x").entries["x"] == pytest.approx(1.0)

    def test_transform_empty_text(self):
        model = tfidf_fit(["a b"])
        assert len(tfidf_transform(model, "")) == 0

    def test_fit_empty_corpus_raises(self):
        with pytest.raises(ValueError):
            tfidf_fit([])

    def test_unseen_term_gets_df_zero_idf(self):
        model = tfidf_fit(["a", "b", "c"])
        vec = tfidf_transform(model, "zzz")
        assert vec.entries["zzz"] == pytest.approx(math.log(4.0) + 1.0)

    def test_idf_formula_against_direct_evaluation(self):
        docs = ["a b c", "a b", "a", "d d d"]
        model = tfidf_fit(docs)
        for term, df in [("a", 3), ("b", 2), ("c", 1), ("d", 1)]:
            assert model.idf[term] == pytest.approx(math.log((1 + 4) / (1 + df)) + 1.0)


class TestCosine:
    def test_self_similarity(self):
        v = SparseVector({"a": 2.0, "b": 1.0})
        assert cosine(v, v) == pytest.approx(1.0)
        dense = np.array([0.3, -0.2, 1.5])
        assert cosine(dense, dense) == pytest.approx(1.0)

    def test_orthogonal_unit_vectors(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
        assert cosine(SparseVector({"a": 1.0}), SparseVector({"b": 1.0})) == 0.0

    def test_hand_computed_dense_value(self):
        # (1,1,0).(1,0,0) / (sqrt(2)*1) = 0.7071067811865475
        assert cosine([1.0, 1.0, 0.0], [1.0, 0.0, 0.0]) == pytest.approx(0.70710678, abs=1e-8)

    def test_zero_norm_flags_and_returns_zero(self):
        with pytest.warns(ZeroNormWarning):
            assert cosine(np.zeros(3), np.array([1.0, 0.0, 0.0])) == 0.0
        with pytest.warns(ZeroNormWarning):
            assert cosine(SparseVector({}), SparseVector({"a": 1.0})) == 0.0

    def test_dense_dim_mismatch(self):
        with pytest.raises(ValueError):
            cosine(np.ones(3), np.ones(4))

    def test_symmetry_and_scale_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            u = rng.normal(size=6)
            v = rng.normal(size=6)
            a = float(rng.uniform(0.1, 10.0))
            assert cosine(u, v) == pytest.approx(cosine(v, u), abs=1e-12)
            assert cosine(a * u, v) == pytest.approx(cosine(u, v), abs=1e-10)

    def test_sparse_values_in_unit_interval(self):
        model = tfidf_fit(["alpha beta", "beta gamma", "delta"])
        texts = ["alpha beta gamma", "beta", "delta delta", "alpha"]
        for t1 in texts:
            for t2 in texts:
                s = cosine(tfidf_transform(model, t1), tfidf_transform(model, t2))
                assert 0.0 <= s <= 1.0 + 1e-12


class TestSplitSentences:
    def test_two_simple_sentences(self):
        assert split_sentences("A b. C d.") == ["A b.", "C d."]

    def test_empty(self):
        assert split_sentences("") == []
        assert split_sentences("   \n ") == []

    def test_abbreviation_guard(self):
        got = split_sentences("Sen. Warren spoke. He left.")
        assert got == ["Sen. Warren spoke.", "He left."]

    def test_initial_guard(self):
        got = split_sentences("George W. Bush won. The race ended.")
        assert got == ["George W. Bush won.", "The race ended."]

    def test_lowercase_continuation_not_split(self):
        assert split_sentences("it was v. good afterwards.") == ["it was v. good afterwards."]

    def test_question_and_exclamation(self):
        got = split_sentences("Really? Yes! Fine.")
        assert got == ["Really?", "Yes!", "Fine."]

    def test_decimal_numbers_not_split(self):
        assert split_sentences("It grew 3.5 percent. Wow.") == ["It grew 3.5 percent.", "Wow."]

    def test_no_terminal_punctuation(self):
        assert split_sentences("no punctuation here") == ["no punctuation here"]

    def test_matches_shared_conformance_fixture(self):
        # fixtures/sentence_splitting.json is the splitting contract shared
        # with the offline vector exporter; both sides must match it exactly
        import json
        from pathlib import Path

        fixture = Path(__file__).parents[1] / "fixtures" / "sentence_splitting.json"
        for case in json.loads(fixture.read_text(encoding="utf-8")):
            assert split_sentences(case["body"]) == case["sentences"], repr(case["body"])

    def test_conservation_of_nonwhitespace(self):
        rng = np.random.default_rng(7)
        samples = [
            "Dr. Smith said so. It is true! Is it? Mr. B disagreed.",
            "One. two. Three. FOUR! five",
            'He said "Stop." Then left. "Why?" She asked.',
        ]
        for _ in range(50):
            words = rng.choice(["Abc", "def.", "Gh!", "i?", "Dr.", "J."], size=rng.integers(1, 12))
            samples.append(" ".join(words))
        for text in samples:
            joined = "".join(split_sentences(text))
            assert sorted(joined.replace(" ", "")) == sorted("".join(text.split()))


def _histogram_fixture():
    from claimrank.corpus import ClaimPair, InputClaim, PairSet, VerifiedClaim, VerifiedClaimStore

    claims = VerifiedClaimStore(
        [
            VerifiedClaim(id="v1", ver_claim="taxes went up last year", title="t1"),
            VerifiedClaim(id="v2", ver_claim="the wall was never built", title="t2"),
            VerifiedClaim(id="v3", ver_claim="crime fell sharply", title="t3"),
        ]
    )
    pairs = PairSet()
    for iid, text, vid in [
        ("i1", "taxes went up last year", "v1"),          # identical -> sim 1.0
        ("i2", "they say the wall was never built", "v2"),  # high overlap
        ("i3", "unemployment doubled somehow", "v3"),       # no overlap -> sim 0.0
    ]:
        pairs.inputs.add(InputClaim(id=iid, text=text))
        pairs.pairs.append(ClaimPair(input_id=iid, verified_id=vid))
    return pairs, claims


class TestSimilarityHistogram:
    def test_counts_monotone_non_increasing(self):
        pairs, claims = _histogram_fixture()
        rows = similarity_histogram(pairs, claims, thresholds=[0.75, 0.5, 0.25, 0.0])
        counts = [r.count for r in rows]
        assert counts == sorted(counts, reverse=True)

    def test_threshold_minus_one_returns_all_pairs(self):
        pairs, claims = _histogram_fixture()
        (row,) = similarity_histogram(pairs, claims, thresholds=[-1.0])
        assert row.count == 3
        assert row.percent == pytest.approx(100.0)

    def test_identical_pair_counted_above_high_threshold(self):
        pairs, claims = _histogram_fixture()
        (row,) = similarity_histogram(pairs, claims, thresholds=[0.99])
        assert row.count == 1  # only the identical i1-v1 pair

    def test_zero_overlap_pair_not_counted_at_zero(self):
        pairs, claims = _histogram_fixture()
        (row,) = similarity_histogram(pairs, claims, thresholds=[0.0])
        assert row.count == 2  # i3-v3 has similarity exactly 0.0, not > 0

    def test_tsv_output(self, tmp_path):
        rows = [HistogramRow(0.25, 201, 27.0), HistogramRow(0.0, 768, 100.0)]
        out = tmp_path / "hist.tsv"
        write_histogram_tsv(rows, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "threshold\tcount\tpercent"
        assert lines[1] == "0.25\t201\t27.0"
