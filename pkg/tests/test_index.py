from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compass import Catalog, CourseRecord, LevelFilter, build_index, cosine_similarity, top_k
from compass.errors import DimensionMismatchError, MissingEmbeddingError, ZeroVectorError
from compass.synthetic import synthetic_catalog

from conftest import unit


def sort_oracle(index, query, k, level_filter=None):
    """Full sort over all candidates with the catalog-position tie-break."""
    q = unit(query)
    sims = index.matrix @ q
    level_filter = level_filter or LevelFilter.all_levels()
    candidates = [i for i in range(len(index)) if level_filter.matches(int(index.levels[i]))]
    ordered = sorted(candidates, key=lambda i: (-sims[i], i))[:k]
    return [(index.courses[i].course_id, float(np.clip(sims[i], -1, 1))) for i in ordered]


class TestBuildIndex:
    def test_three_four_five_normalization(self):
        cat = Catalog(
            courses=(
                CourseRecord(course_id="A 100", level=100, subject="A", title="t", description="d", embedding=np.array([3.0, 4.0])),
            )
        )
        idx = build_index(cat)
        np.testing.assert_allclose(idx.matrix[0], [0.6, 0.8], atol=1e-15)

    def test_missing_embedding_names_course(self):
        cat = Catalog(
            courses=(
                CourseRecord(course_id="A 100", level=100, subject="A", title="t", description="d", embedding=np.ones(4)),
                CourseRecord(course_id="PHIL 101", level=100, subject="PHIL", title="t", description="d"),
            )
        )
        with pytest.raises(MissingEmbeddingError, match="PHIL 101"):
            build_index(cat)

    def test_all_norms_unit(self):
        idx = build_index(synthetic_catalog(1000, dimension=24, seed=5))
        norms = np.linalg.norm(idx.matrix, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-9

    def test_source_catalog_untouched(self):
        cat = synthetic_catalog(5, dimension=8, seed=2)
        before = [c.embedding.copy() for c in cat]
        build_index(cat)
        for b, c in zip(before, cat):
            assert np.array_equal(b, c.embedding)


class TestCosine:
    def test_identity(self):
        v = np.array([0.3, -1.2, 2.2])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-15)

    def test_closed_form_inverse_sqrt2(self):
        assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(0.7071067811865475, abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_zero_vector(self):
        with pytest.raises(ZeroVectorError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_clamped_to_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.standard_normal(6), rng.standard_normal(6)
            assert -1.0 <= cosine_similarity(a, b) <= 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.standard_normal(8), rng.standard_normal(8)
            assert abs(cosine_similarity(a, b) - cosine_similarity(b, a)) <= 1e-12


class TestTopK:
    def test_saturation_returns_all_sorted(self, small_index):
        rng = np.random.default_rng(9)
        q = rng.standard_normal(small_index.dimension)
        res = top_k(small_index, q, k=10 * len(small_index))
        assert len(res) == len(small_index)
        sims = [r.similarity for r in res]
        assert sims == sorted(sims, reverse=True)
        assert [r.rank for r in res] == list(range(1, len(res) + 1))

    def test_matches_oracle_with_many_random_queries(self):
        idx = build_index(synthetic_catalog(1000, dimension=16, seed=4))
        rng = np.random.default_rng(44)
        for k in (1, 10, 50, len(idx)):
            for _ in range(25):
                q = rng.standard_normal(16)
                got = [(r.course_id, r.similarity) for r in top_k(idx, q, k)]
                expected = sort_oracle(idx, q, k)
                assert [g[0] for g in got] == [e[0] for e in expected]
                np.testing.assert_allclose([g[1] for g in got], [e[1] for e in expected], atol=1e-12)

    def test_bit_identical_embeddings_tie_break(self):
        vec = unit(np.array([1.0, 2.0, 3.0]))
        courses = tuple(
            CourseRecord(course_id=f"T {100 + i}", level=100, subject="T", title="t", description="d", embedding=vec.copy())
            for i in range(3)
        )
        idx = build_index(Catalog(courses=courses))
        res = top_k(idx, vec, k=1)
        assert res[0].course_id == "T 100"
        res2 = top_k(idx, vec, k=2)
        assert [r.course_id for r in res2] == ["T 100", "T 101"]

    def test_tie_break_with_mixed_similarities(self):
        # earlier catalog position must win among equals even when the heap
        # evicts under pressure from a later, strictly better course
        e1 = unit([1.0, 0.0])
        e2 = unit([0.0, 1.0])
        courses = tuple(
            CourseRecord(course_id=f"T {100 + i}", level=100, subject="T", title="t", description="d", embedding=e)
            for i, e in enumerate([e1, e1, e2])
        )
        idx = build_index(Catalog(courses=courses))
        res = top_k(idx, unit([0.2, 1.0]), k=2)
        assert [r.course_id for r in res] == ["T 102", "T 100"]

    def test_scale_invariance_of_ranking(self, small_index):
        rng = np.random.default_rng(3)
        q = rng.standard_normal(small_index.dimension)
        baseline = [r.course_id for r in top_k(small_index, q, k=25)]
        for c in (1e-3, 1.0, 1e3):
            scaled = [r.course_id for r in top_k(small_index, q * c, k=25)]
            assert scaled == baseline

    def test_filter_soundness(self, small_index):
        rng = np.random.default_rng(12)
        q = rng.standard_normal(small_index.dimension)
        f = LevelFilter.between(300, 400)
        res = top_k(small_index, q, k=50, level_filter=f)
        assert res, "synthetic catalog should contain 300-400 level courses"
        assert all(f.matches(r.course.level) for r in res)
        assert [(r.course_id, r.similarity) for r in res] == sort_oracle(small_index, q, 50, f)

    def test_filter_removing_everything_returns_empty(self, small_index):
        rng = np.random.default_rng(13)
        q = rng.standard_normal(small_index.dimension)
        assert top_k(small_index, q, k=5, level_filter=LevelFilter.at_least(900)) == []

    def test_query_dimension_mismatch(self, small_index):
        with pytest.raises(DimensionMismatchError):
            top_k(small_index, np.ones(small_index.dimension + 1), k=3)

    def test_monotone_similarity_output(self, small_index):
        rng = np.random.default_rng(21)
        for _ in range(20):
            res = top_k(small_index, rng.standard_normal(small_index.dimension), k=30)
            for a, b in zip(res, res[1:]):
                assert a.similarity >= b.similarity

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(min_value=1, max_value=60),
        k=st.integers(min_value=1, max_value=70),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    def test_oracle_equivalence_property(self, n, k, seed):
        idx = build_index(synthetic_catalog(n, dimension=6, seed=seed))
        q = np.random.default_rng(seed + 1).standard_normal(6)
        got = [(r.course_id, r.similarity) for r in top_k(idx, q, k)]
        assert got == sort_oracle(idx, q, k)
