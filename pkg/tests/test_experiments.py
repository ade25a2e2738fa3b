from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from compass import (
    Catalog,
    CourseRecord,
    LevelFilter,
    MockProvider,
    Recommender,
    StochasticMockProvider,
    StudentQuery,
    build_index,
)
from compass.errors import UnknownSubjectError, ZeroMeanError
from compass.experiments import (
    bias_pairs,
    latency_bench,
    rank_likelihood,
    subject_embedding,
    subject_network,
    subject_similarity_matrix,
)
from compass.synthetic import synthetic_catalog

from conftest import DIM, unit

BIAS_TEMPLATE = "I am a {} interested in machine learning. What courses should I take?"


def course(cid, subject, vec, level=200):
    return CourseRecord(
        course_id=cid, level=level, subject=subject, title=f"t {cid}", description=f"d {cid}",
        embedding=np.asarray(vec, dtype=np.float64),
    )


class TestSubjectEmbedding:
    def test_single_course_subject_is_normalized_embedding(self):
        cat = Catalog(courses=(course("A 200", "A", [3.0, 4.0]),))
        np.testing.assert_allclose(subject_embedding(cat, "A"), [0.6, 0.8], atol=1e-15)

    def test_opposite_embeddings_zero_mean(self):
        v = unit([1.0, 2.0, -1.0])
        cat = Catalog(courses=(course("A 200", "A", v), course("A 201", "A", -v)))
        with pytest.raises(ZeroMeanError):
            subject_embedding(cat, "A")

    def test_unknown_subject(self, small_catalog):
        with pytest.raises(UnknownSubjectError):
            subject_embedding(small_catalog, "NOPE")

    def test_matches_naive_loop_oracle(self):
        cat = synthetic_catalog(40, dimension=12, seed=8)
        for subject in cat.subjects:
            vectors = [c.embedding for c in cat if c.subject == subject]
            acc = np.zeros(12)
            for v in vectors:
                acc = acc + v
            mean = acc / len(vectors)
            expected = mean / np.linalg.norm(mean)
            np.testing.assert_allclose(subject_embedding(cat, subject), expected, atol=1e-12)


class TestSubjectNetwork:
    def test_identical_subjects_edge_is_one(self):
        v1, v2 = unit([1.0, 2.0, 3.0]), unit([0.5, -1.0, 0.25])
        cat = Catalog(
            courses=(
                course("A 200", "A", v1), course("A 201", "A", v2),
                course("B 200", "B", v1.copy()), course("B 201", "B", v2.copy()),
            )
        )
        net = subject_network(cat, ["A", "B"])
        assert net.similarity("A", "B") == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_clusters_near_zero_cross_edges(self):
        rng = np.random.default_rng(5)
        courses = []
        for i in range(6):
            va = np.zeros(16)
            va[:8] = rng.random(8) + 0.1
            vb = np.zeros(16)
            vb[8:] = rng.random(8) + 0.1
            courses.append(course(f"A {200 + i}", "A", va))
            courses.append(course(f"B {200 + i}", "B", vb))
        net = subject_network(Catalog(courses=tuple(courses)), ["A", "B"])
        assert abs(net.similarity("A", "B")) < 1e-12

    def test_symmetry_over_random_subjects(self):
        cat = synthetic_catalog(120, dimension=10, seed=3, subjects=tuple(f"S{i:02d}" for i in range(12)))
        subjects = cat.subjects
        matrix = subject_similarity_matrix(cat, subjects)
        np.testing.assert_allclose(matrix, matrix.T, atol=1e-12)
        np.testing.assert_allclose(np.diag(matrix), 1.0, atol=1e-9)
        assert np.all(matrix >= -1.0) and np.all(matrix <= 1.0)

    def test_requires_two_subjects(self, small_catalog):
        with pytest.raises(ValueError):
            subject_network(small_catalog, ["AAAA"])

    def test_exports(self, small_catalog):
        subjects = small_catalog.subjects[:3]
        net = subject_network(small_catalog, subjects)
        d = net.to_json_dict()
        assert len(d["edges"]) == 3
        dot = net.to_dot()
        assert dot.startswith("graph subjects {")
        assert f'"{subjects[0]}" -- "{subjects[1]}"' in dot


QUERIES = [
    StudentQuery(text="I am interested in data analysis."),
    StudentQuery(text="I am interested in medieval history."),
    StudentQuery(text="I am interested in circuit design."),
]


class TestRankLikelihood:
    def test_deterministic_mock_hits_top_ten_always(self, pipeline, tmp_path):
        result = rank_likelihood(QUERIES, trials_per_query=3, pipeline=pipeline, out_dir=tmp_path)
        for r in range(1, 11):
            assert result.per_rank[r] == 1.0
            assert result.per_rank_query_mean[r] == 1.0
        for r in range(11, result.k + 1):
            assert result.per_rank[r] == 0.0
        assert result.cumulative_share[10] == 1.0
        assert result.cumulative_share[result.k] == 1.0
        assert result.trials_total == 9
        assert result.failures == 0

        rows = [json.loads(line) for line in (tmp_path / "rank_trials.jsonl").read_text().splitlines()]
        assert len(rows) == 9
        assert all(len(r["recommended"]) == 10 for r in rows)
        with (tmp_path / "rank_likelihood.csv").open() as fh:
            table = list(csv.DictReader(fh))
        assert len(table) == 50
        assert float(table[0]["likelihood_pooled"]) == 1.0

    def test_cumulative_share_monotone(self, small_index):
        pipe = Recommender(small_index, StochasticMockProvider(seed=13, dimension=DIM), k=50)
        result = rank_likelihood(QUERIES, trials_per_query=4, pipeline=pipe)
        values = [result.cumulative_share[r] for r in range(1, 51)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(1.0)

    def test_stochastic_mock_bit_reproducible(self, small_index):
        def run():
            pipe = Recommender(small_index, StochasticMockProvider(seed=21, dimension=DIM), k=50)
            return rank_likelihood(QUERIES, trials_per_query=5, pipeline=pipe)

        a, b = run(), run()
        assert a.per_rank == b.per_rank
        assert a.cumulative_share == b.cumulative_share
        assert a.per_query_rank_counts == b.per_query_rank_counts

    def test_stochastic_profile_decreases_in_rank_bands(self, small_index):
        pipe = Recommender(small_index, StochasticMockProvider(seed=2, dimension=DIM), k=50)
        result = rank_likelihood(QUERIES * 2, trials_per_query=8, pipeline=pipe)
        band = lambda lo, hi: np.mean([result.per_rank[r] for r in range(lo, hi + 1)])
        assert band(1, 5) > band(6, 15) > band(16, 25)
        assert band(26, 50) == 0.0  # sampling pool is the top 25

    def test_trial_failures_logged_and_excluded(self, small_index):
        class FlakyEvery3rd(MockProvider):
            def __init__(self, **kw):
                super().__init__(**kw)
                self.n = 0

            def _recommend_markdown(self, ids, prompt):
                self.n += 1
                if self.n % 3 == 0:
                    raise RuntimeError("sporadic failure")
                return super()._recommend_markdown(ids, prompt)

        pipe = Recommender(small_index, FlakyEvery3rd(seed=7, dimension=DIM), k=50)
        result = rank_likelihood(QUERIES, trials_per_query=3, pipeline=pipe)
        assert result.failures == 3
        assert result.trials_total == 6


class TestBiasPairs:
    def test_template_validation(self, pipeline):
        with pytest.raises(ValueError):
            bias_pairs("no placeholder", "a", "b", 1, pipeline)
        with pytest.raises(ValueError):
            bias_pairs("{} two {}", "a", "b", 1, pipeline)

    def test_deterministic_mock_null_case(self, pipeline, tmp_path):
        report = bias_pairs(BIAS_TEMPLATE, "man", "woman", trials=5, pipeline=pipeline,
                            attribute="birth_sex", out_dir=tmp_path)
        assert len(report.rates) == 10
        for rate_a, rate_b in report.rates.values():
            assert rate_a == 1.0
            assert rate_b == 1.0
        assert report.max_delta() == 0.0
        saved = json.loads((tmp_path / "bias_report.json").read_text())
        assert saved["attribute"] == "birth_sex"
        assert len((tmp_path / "bias_trials.jsonl").read_text().splitlines()) == 10

    def test_stochastic_mock_shows_deltas_reproducibly(self, small_index):
        def run():
            pipe = Recommender(small_index, StochasticMockProvider(seed=31, dimension=DIM), k=50)
            return bias_pairs(BIAS_TEMPLATE, "man", "woman", trials=12, pipeline=pipe)

        a, b = run(), run()
        assert a.rates == b.rates
        assert a.max_delta() > 0.0

    def test_rates_in_unit_interval(self, small_index):
        pipe = Recommender(small_index, StochasticMockProvider(seed=3, dimension=DIM), k=50)
        report = bias_pairs(BIAS_TEMPLATE, "gay", "straight", trials=6, pipeline=pipe)
        for ra, rb in report.rates.values():
            assert 0.0 <= ra <= 1.0
            assert 0.0 <= rb <= 1.0


class TestLatencyBench:
    LEVELS = [LevelFilter.all_levels(), LevelFilter.between(100, 200), LevelFilter.between(300, 400), LevelFilter.at_least(500)]

    def test_four_rows_with_invariant(self, pipeline, tmp_path):
        rows = latency_bench(self.LEVELS, trials=2, pipeline=pipeline, out_dir=tmp_path)
        assert len(rows) == 4
        for row in rows:
            assert row.mean_retrieval_s <= row.mean_total_s
            assert row.trials == 2
        with (tmp_path / "latency.csv").open() as fh:
            assert len(list(csv.DictReader(fh))) == 4

    def test_failed_trials_excluded(self, small_index):
        class AlwaysBroken(MockProvider):
            def _chat(self, request):
                raise RuntimeError("dead")

        pipe = Recommender(small_index, AlwaysBroken(seed=1, dimension=DIM), k=50)
        assert latency_bench([LevelFilter.all_levels()], trials=2, pipeline=pipe) == []
