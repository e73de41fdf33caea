import math
import random

import numpy as np
import pytest

from ragbench.corpus import QaPair
from ragbench.embeddings import TokenStore, stub_embed_tokens
from ragbench.metrics import tokenize
from ragbench.rerank import (
    Bm25Params,
    Bm25Stats,
    Candidate,
    RerankError,
    Strategy,
    bm25_build,
    bm25_score,
    candidate_text,
    maxsim_score,
    overlap_scorer,
    rerank_bm25,
    rerank_dense,
    rerank_late_interaction,
    rerank_seq2seq,
)


def make_candidates(count, seed=0):
    rng = random.Random(seed)
    words = "renal cardiac hepatic fever lesion serum biopsy onset".split()
    out = []
    for i in range(count):
        qa = QaPair(
            id=f"c{i:02d}",
            question=" ".join(rng.choices(words, k=4)) + "?",
            answer=" ".join(rng.choices(words, k=6)) + ".",
        )
        out.append(Candidate(qa=qa, dense_distance=rng.random() * 4))
    return out


def maxsim_oracle(q, d):
    total = 0.0
    for qi in q:
        best = -2.0
        for dj in d:
            dot = math.fsum(float(a) * float(b) for a, b in zip(qi, dj))
            nq = math.sqrt(math.fsum(float(a) ** 2 for a in qi))
            nd = math.sqrt(math.fsum(float(b) ** 2 for b in dj))
            best = max(best, max(-1.0, min(1.0, dot / (nq * nd))))
        total += best
    return total


def assert_valid_ranking(ranked, n, pool_size, strategy):
    assert len(ranked) == min(n, pool_size)
    assert [ctx.rank for ctx in ranked] == list(range(1, len(ranked) + 1))
    assert all(ctx.strategy is strategy for ctx in ranked)
    for a, b in zip(ranked, ranked[1:]):
        assert a.score >= b.score
        if a.score == b.score:
            assert a.qa.id < b.qa.id


class TestDense:
    def test_sixteen_to_four(self):
        candidates = make_candidates(16)
        ranked = rerank_dense(candidates, 4)
        expect = sorted(candidates, key=lambda c: (c.dense_distance, c.qa.id))[:4]
        assert [ctx.qa.id for ctx in ranked] == [c.qa.id for c in expect]
        assert [ctx.score for ctx in ranked] == [-c.dense_distance for c in expect]
        assert_valid_ranking(ranked, 4, 16, Strategy.DENSE_L2)

    def test_n_clamped(self):
        candidates = make_candidates(3)
        assert len(rerank_dense(candidates, 10)) == 3

    def test_permutation_invariant(self):
        candidates = make_candidates(16, seed=1)
        baseline = rerank_dense(candidates, 4)
        for s in range(10):
            shuffled = list(candidates)
            random.Random(s).shuffle(shuffled)
            assert rerank_dense(shuffled, 4) == baseline

    def test_empty_rejected(self):
        with pytest.raises(RerankError):
            rerank_dense([], 4)


class TestBm25Build:
    def test_counting_example(self):
        stats = bm25_build({"d1": ["a", "b"], "d2": ["b", "b"]})
        assert stats.n_docs == 2
        assert stats.avgdl == 2.0
        assert stats.doc_freq == {"a": 1, "b": 2}

    def test_all_empty_docs_rejected(self):
        with pytest.raises(RerankError, match="average length"):
            bm25_build({"d1": []})

    def test_empty_corpus_rejected(self):
        with pytest.raises(RerankError):
            bm25_build({})

    def test_df_table_matches_naive_recount(self):
        rng = random.Random(5)
        docs = {
            f"d{i}": [rng.choice("abcdef") for _ in range(rng.randint(1, 12))]
            for i in range(100)
        }
        stats = bm25_build(docs)
        for term in "abcdef":
            expect = sum(1 for tokens in docs.values() if term in tokens)
            assert stats.doc_freq.get(term, 0) == expect
        assert stats.avgdl == pytest.approx(
            sum(len(t) for t in docs.values()) / 100, abs=1e-12
        )


class TestBm25Score:
    def test_hand_computed_example(self):
        # query "a" on {d1: "a b", d2: "b b"} with k1=1.5, b=0.75:
        # idf(a)=ln2, tf=1, dl=2=avgdl -> denom = 1 + 1.5 = 2.5 -> ln2
        stats = bm25_build({"d1": ["a", "b"], "d2": ["b", "b"]})
        params = Bm25Params()
        assert bm25_score(stats, params, ["a"], "d1") == pytest.approx(math.log(2), abs=1e-6)
        assert bm25_score(stats, params, ["a"], "d2") == 0.0

    def test_absent_term_scores_zero_everywhere(self):
        stats = bm25_build({"d1": ["a"], "d2": ["b"]})
        for doc_id in ("d1", "d2"):
            assert bm25_score(stats, Bm25Params(), ["zzz"], doc_id) == 0.0

    def test_duplicate_query_term_adds_per_occurrence(self):
        stats = bm25_build({"d1": ["a", "b", "a"], "d2": ["b"]})
        params = Bm25Params()
        single = bm25_score(stats, params, ["a"], "d1")
        double = bm25_score(stats, params, ["a", "a"], "d1")
        assert double == pytest.approx(2 * single, abs=1e-12)
        # naive summation oracle over query occurrences
        def oracle(query, doc_id):
            tokens = stats.doc_tokens[doc_id]
            dl = len(tokens)
            total = 0.0
            for term in query:
                tf = tokens.count(term)
                if tf == 0:
                    continue
                df = sum(1 for t in stats.doc_tokens.values() if term in t)
                idf = math.log(1 + (stats.n_docs - df + 0.5) / (df + 0.5))
                total += idf * tf * (params.k1 + 1) / (
                    tf + params.k1 * (1 - params.b + params.b * dl / stats.avgdl)
                )
            return total
        for query in (["a"], ["a", "a"], ["a", "b"], ["b", "b", "a"]):
            assert bm25_score(stats, params, query, "d1") == pytest.approx(
                oracle(query, "d1"), abs=1e-12
            )

    def test_unknown_doc_rejected(self):
        stats = bm25_build({"d1": ["a"]})
        with pytest.raises(RerankError, match="unknown doc"):
            bm25_score(stats, Bm25Params(), ["a"], "nope")

    def test_score_nonnegative_and_finite(self):
        rng = random.Random(6)
        docs = {f"d{i}": [rng.choice("abc") for _ in range(rng.randint(1, 8))] for i in range(20)}
        stats = bm25_build(docs)
        for i in range(20):
            score = bm25_score(stats, Bm25Params(), ["a", "b"], f"d{i}")
            assert score >= 0.0 and math.isfinite(score)

    def test_added_occurrence_never_decreases_score(self):
        # brute force over small corpora: one more matching occurrence in the
        # doc (same length adjustment inputs) never lowers the score
        params = Bm25Params()
        for tf in range(0, 5):
            docs = {
                "target": ["q"] * tf + ["x"] * (6 - tf),
                "other": ["y", "z", "q"],
            }
            stats = bm25_build(docs)
            score = bm25_score(stats, params, ["q"], "target")
            docs_more = {
                "target": ["q"] * (tf + 1) + ["x"] * (5 - tf),
                "other": ["y", "z", "q"],
            }
            stats_more = bm25_build(docs_more)
            score_more = bm25_score(stats_more, params, ["q"], "target")
            assert score_more >= score

    def test_bad_params_rejected(self):
        with pytest.raises(RerankError):
            Bm25Params(k1=0.0)
        with pytest.raises(RerankError):
            Bm25Params(b=1.5)


class TestRerankBm25:
    def test_query_terms_win(self):
        hit = Candidate(
            qa=QaPair(id="hit", question="renal failure cause?", answer="renal failure answer."),
            dense_distance=3.0,
        )
        misses = [
            Candidate(
                qa=QaPair(id=f"m{i}", question="unrelated words here?", answer="other text."),
                dense_distance=0.1,
            )
            for i in range(3)
        ]
        ranked = rerank_bm25([*misses, hit], "renal failure", n=4)
        assert ranked[0].qa.id == "hit"

    def test_identical_texts_fall_back_to_id_order(self):
        candidates = [
            Candidate(qa=QaPair(id=f"x{i}", question="same q?", answer="same a."), dense_distance=1.0)
            for i in (3, 1, 2, 0)
        ]
        ranked = rerank_bm25(candidates, "same", n=4)
        assert [ctx.qa.id for ctx in ranked] == ["x0", "x1", "x2", "x3"]

    def test_matches_brute_force_ordering(self):
        candidates = make_candidates(16, seed=2)
        query = "renal fever onset"
        ranked = rerank_bm25(candidates, query, n=16)
        stats = bm25_build(
            {c.qa.id: list(tokenize(candidate_text(c.qa)).tokens) for c in candidates}
        )
        query_tokens = list(tokenize(query).tokens)
        expect = sorted(
            candidates,
            key=lambda c: (-bm25_score(stats, Bm25Params(), query_tokens, c.qa.id), c.qa.id),
        )
        assert [ctx.qa.id for ctx in ranked] == [c.qa.id for c in expect]
        assert_valid_ranking(ranked, 16, 16, Strategy.BM25)


class TestMaxSim:
    def test_identical_orthonormal_rows(self):
        mat = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert maxsim_score(mat, mat) == pytest.approx(2.0, abs=1e-9)

    def test_hand_cosine(self):
        q = np.array([[1.0, 0.0]])
        d = np.array([[0.0, 1.0], [0.7071, 0.7071]])
        assert maxsim_score(q, d) == pytest.approx(1 / math.sqrt(2), abs=1e-4)

    def test_random_matrices_match_oracle(self):
        rng = np.random.default_rng(3)
        q = rng.standard_normal((4, 8)).astype(np.float32)
        d = rng.standard_normal((6, 8)).astype(np.float32)
        assert maxsim_score(q, d) == pytest.approx(maxsim_oracle(q, d), abs=1e-6)

    def test_bounds(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            q = rng.standard_normal((rng.integers(1, 6), 5))
            d = rng.standard_normal((rng.integers(1, 6), 5))
            score = maxsim_score(q, d)
            assert -len(q) <= score <= len(q)
        # equality iff every query token has an exact-direction match
        q = rng.standard_normal((3, 5))
        assert maxsim_score(q, q * 2.0) == pytest.approx(len(q), abs=1e-9)

    def test_dim_mismatch(self):
        with pytest.raises(RerankError):
            maxsim_score(np.ones((1, 3)), np.ones((1, 4)))

    def test_empty_rejected(self):
        with pytest.raises(RerankError):
            maxsim_score(np.zeros((0, 3)), np.ones((1, 3)))


class TestLateInteraction:
    def build_store(self, candidates, dim=8, seed=0):
        store = TokenStore(dim=dim)
        for c in candidates:
            store.ids.append(c.qa.id)
            store.matrices[c.qa.id] = stub_embed_tokens(candidate_text(c.qa), dim, seed)
        return store

    def test_exact_copy_ranks_first(self):
        candidates = make_candidates(5, seed=7)
        store = self.build_store(candidates)
        target = candidates[2]
        query_tokens = store.matrix(target.qa.id)
        ranked = rerank_late_interaction(candidates, query_tokens, store, n=5)
        assert ranked[0].qa.id == target.qa.id
        assert ranked[0].score == pytest.approx(query_tokens.shape[0], abs=1e-6)

    def test_missing_matrix_errors(self):
        candidates = make_candidates(3)
        store = self.build_store(candidates[:-1])
        with pytest.raises(RerankError, match=candidates[-1].qa.id):
            rerank_late_interaction(candidates, np.ones((2, 8)), store, n=2)

    def test_matches_brute_force_ordering(self):
        candidates = make_candidates(16, seed=9)
        store = self.build_store(candidates)
        query_tokens = stub_embed_tokens("fever onset serum", 8, seed=0)
        ranked = rerank_late_interaction(candidates, query_tokens, store, n=16)
        expect = sorted(
            candidates,
            key=lambda c: (-maxsim_oracle(query_tokens, store.matrix(c.qa.id)), c.qa.id),
        )
        got = [ctx.qa.id for ctx in ranked]
        assert got == [c.qa.id for c in expect]
        assert_valid_ranking(ranked, 16, 16, Strategy.LATE_INTERACTION)


class TestSeq2Seq:
    def test_constant_scorer_id_order(self):
        candidates = make_candidates(6, seed=3)
        ranked = rerank_seq2seq(candidates, "q", lambda q, d: 0.5, n=6)
        assert [ctx.qa.id for ctx in ranked] == sorted(c.qa.id for c in candidates)

    def test_single_relevant_candidate_ranks_first(self):
        candidates = make_candidates(4, seed=4)
        target = candidates[2].qa.id

        def scorer(query, document):
            return 1.0 if candidate_text(candidates[2].qa) == document else 0.0

        ranked = rerank_seq2seq(candidates, "q", scorer, n=4)
        assert ranked[0].qa.id == target

    def test_out_of_range_score_rejected(self):
        candidates = make_candidates(2)
        with pytest.raises(RerankError, match="1.5"):
            rerank_seq2seq(candidates, "q", lambda q, d: 1.5, n=2)

    def test_nan_score_rejected(self):
        candidates = make_candidates(2)
        with pytest.raises(RerankError):
            rerank_seq2seq(candidates, "q", lambda q, d: float("nan"), n=2)

    def test_concurrent_and_serial_agree(self):
        candidates = make_candidates(16, seed=5)
        scorer = overlap_scorer
        serial = rerank_seq2seq(candidates, "renal fever", scorer, n=16, max_in_flight=1)
        threaded = rerank_seq2seq(candidates, "renal fever", scorer, n=16, max_in_flight=4)
        assert serial == threaded


class TestStrategyInvariants:
    def run_all(self, candidates, n, store, query_tokens):
        return {
            Strategy.DENSE_L2: rerank_dense(candidates, n),
            Strategy.BM25: rerank_bm25(candidates, "fever onset", n=n),
            Strategy.LATE_INTERACTION: rerank_late_interaction(
                candidates, query_tokens, store, n
            ),
            Strategy.SEQ2SEQ_RELEVANCE: rerank_seq2seq(
                candidates, "fever onset", overlap_scorer, n
            ),
        }

    def test_sizes_ranks_and_permutation_invariance(self):
        candidates = make_candidates(16, seed=11)
        store = TokenStore(dim=8)
        for c in candidates:
            store.ids.append(c.qa.id)
            store.matrices[c.qa.id] = stub_embed_tokens(candidate_text(c.qa), 8, 0)
        query_tokens = stub_embed_tokens("fever onset", 8, 0)
        for n in (1, 4, 16, 30):
            baseline = self.run_all(candidates, n, store, query_tokens)
            for strategy, ranked in baseline.items():
                assert_valid_ranking(ranked, n, 16, strategy)
            for s in range(5):
                shuffled = list(candidates)
                random.Random(s).shuffle(shuffled)
                assert self.run_all(shuffled, n, store, query_tokens) == baseline

    def test_overlap_scorer_in_unit_range(self):
        rng = random.Random(12)
        words = "aa bb cc dd".split()
        for _ in range(100):
            q = " ".join(rng.choices(words, k=rng.randint(0, 5)))
            d = " ".join(rng.choices(words, k=rng.randint(0, 5)))
            assert 0.0 <= overlap_scorer(q, d) <= 1.0
        assert overlap_scorer("aa bb", "aa bb") == 1.0
