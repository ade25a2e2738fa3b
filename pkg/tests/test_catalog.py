from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compass import (
    Catalog,
    CourseRecord,
    EmbeddingCache,
    LevelFilter,
    MockProvider,
    embed_catalog,
    filter_by_level,
    load_catalog,
    save_catalog,
)
from compass.catalog import as_embedding, derive_level
from compass.errors import (
    DimensionMismatchError,
    DuplicateIdError,
    EmptyCourseError,
    NonFiniteVectorError,
    ParseError,
    ProviderError,
    ZeroVectorError,
)
from compass.synthetic import synthetic_catalog


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


ROWS = [
    {"course_id": "EECS 445", "level": 400, "subject": "EECS", "title": "Intro ML", "description": "Supervised learning."},
    {"course_id": "MATH 217", "level": 200, "subject": "MATH", "title": "Linear Algebra", "description": "Vector spaces."},
    {"course_id": "PHIL 101", "level": 100, "subject": "PHIL", "title": "Logic", "description": ""},
]


class TestLoad:
    def test_jsonl_without_embeddings(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, ROWS)
        cat = load_catalog(path)
        assert len(cat) == 3
        assert cat.dimension is None
        assert [c.course_id for c in cat] == ["EECS 445", "MATH 217", "PHIL 101"]

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, ROWS + [ROWS[0]])
        with pytest.raises(DuplicateIdError):
            load_catalog(path)

    def test_mixed_dimensions_rejected(self, tmp_path):
        rows = [dict(ROWS[0], embedding=[1.0] * 8), dict(ROWS[1], embedding=[1.0] * 7)]
        path = tmp_path / "c.jsonl"
        write_jsonl(path, rows)
        with pytest.raises(DimensionMismatchError):
            load_catalog(path)

    def test_truncated_line_reports_line_number(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(ROWS[0]) + "\n" + '{"course_id": "MATH 2')
        with pytest.raises(ParseError) as exc:
            load_catalog(path)
        assert exc.value.line == 2

    def test_missing_field_is_parse_error(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"course_id": "X 100", "level": 100, "subject": "X"}])
        with pytest.raises(ParseError):
            load_catalog(path)

    def test_csv_round(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "course_id,level,subject,title,description,embedding\n"
            'EECS 445,400,EECS,Intro ML,Supervised learning.,"[0.6, 0.8]"\n'
            "PHIL 101,100,PHIL,Logic,,\n"
        )
        cat = load_catalog(path)
        assert len(cat) == 2
        assert cat.dimension == 2
        np.testing.assert_allclose(cat.courses[0].embedding, [0.6, 0.8])
        assert cat.courses[1].embedding is None

    def test_level_disagreement_warns_but_loads(self, tmp_path, caplog):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"course_id": "EECS 445", "level": 200, "subject": "EECS", "title": "t", "description": "d"}])
        with caplog.at_level("WARNING"):
            cat = load_catalog(path)
        assert len(cat) == 1
        assert "disagrees" in caplog.text


class TestSaveLoadRoundTrip:
    def test_round_trip_exact(self, tmp_path):
        cat = synthetic_catalog(10, dimension=16, seed=3)
        path = tmp_path / "out.jsonl"
        save_catalog(cat, path)
        reloaded = load_catalog(path)
        assert [c.course_id for c in reloaded] == [c.course_id for c in cat]
        for a, b in zip(cat, reloaded):
            assert np.max(np.abs(a.embedding - b.embedding)) <= 1e-12

    def test_save_is_byte_stable(self, tmp_path):
        cat = synthetic_catalog(10, dimension=16, seed=3)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_catalog(cat, p1)
        save_catalog(cat, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_catalog(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        save_catalog(Catalog(courses=()), path)
        assert load_catalog(path).courses == ()

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(min_value=1, max_value=20), seed=st.integers(min_value=0, max_value=10_000))
    def test_round_trip_property(self, tmp_path_factory, n, seed):
        cat = synthetic_catalog(n, dimension=8, seed=seed)
        path = tmp_path_factory.mktemp("rt") / "cat.jsonl"
        save_catalog(cat, path)
        reloaded = load_catalog(path)
        assert len(reloaded) == len(cat)
        for a, b in zip(cat, reloaded):
            assert a.course_id == b.course_id
            assert np.array_equal(a.embedding, b.embedding)


class TestLevelFilter:
    def test_parse_variants(self):
        assert LevelFilter.parse("all") == LevelFilter.all_levels()
        assert LevelFilter.parse("100-200") == LevelFilter.between(100, 200)
        assert LevelFilter.parse("500+") == LevelFilter.at_least(500)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            LevelFilter.between(300, 100)
        with pytest.raises(ValueError):
            LevelFilter.between(150, 200)

    def test_range_keeps_inclusive_levels(self):
        cat = Catalog(
            courses=tuple(
                CourseRecord(course_id=f"S {lvl}", level=lvl, subject="S", title="t", description="d")
                for lvl in (100, 200, 300, 500)
            )
        )
        kept = filter_by_level(cat, LevelFilter.between(100, 200))
        assert [c.level for c in kept] == [100, 200]

    def test_all_is_identity(self, small_catalog):
        assert filter_by_level(small_catalog, LevelFilter.all_levels()).courses == small_catalog.courses

    def test_min_filter_empty_result(self):
        cat = Catalog(
            courses=(CourseRecord(course_id="S 400", level=400, subject="S", title="t", description="d"),)
        )
        assert len(filter_by_level(cat, LevelFilter.at_least(500))) == 0

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000), spec=st.sampled_from(["all", "100-200", "300-400", "500+"]))
    def test_filter_soundness_and_completeness(self, seed, spec):
        cat = synthetic_catalog(30, dimension=4, seed=seed)
        f = LevelFilter.parse(spec)
        view = filter_by_level(cat, f)
        assert all(f.matches(c.level) for c in view)
        expected = [c.course_id for c in cat if f.matches(c.level)]
        assert [c.course_id for c in view] == expected


class TestEmbeddings:
    def test_as_embedding_rejects_zero(self):
        with pytest.raises(ZeroVectorError):
            as_embedding([0.0, 0.0])

    def test_as_embedding_rejects_nan(self):
        with pytest.raises(NonFiniteVectorError):
            as_embedding([1.0, float("nan")])

    def test_derive_level(self):
        assert derive_level("EECS 445") == 400
        assert derive_level("MATH 1000") == 1000
        assert derive_level("NONUM") is None

    def test_embed_catalog_fills_all(self):
        cat = synthetic_catalog(3, seed=0, embed=False)
        provider = MockProvider(seed=1, dimension=1536)
        embedded = embed_catalog(cat, provider, batch_size=2)
        assert embedded.fully_embedded()
        assert embedded.dimension == 1536
        for c in embedded:
            assert c.embedding.shape == (1536,)

    def test_embed_catalog_idempotent(self):
        cat = synthetic_catalog(3, seed=0, embed=False)
        provider = MockProvider(seed=1, dimension=16)
        once = embed_catalog(cat, provider, batch_size=1)
        calls_before = len(provider.calls)
        twice = embed_catalog(once, provider, batch_size=1)
        assert twice is once
        assert len(provider.calls) == calls_before

    def test_embed_uses_title_when_description_empty(self):
        course = CourseRecord(course_id="COMP 100", level=100, subject="COMP", title="Writing", description="")
        assert course.embedding_text == "Writing"

    def test_embed_catalog_empty_course_rejected(self):
        cat = Catalog(courses=(CourseRecord(course_id="X 100", level=100, subject="X", title="", description=""),))
        with pytest.raises(EmptyCourseError):
            embed_catalog(cat, MockProvider(dimension=8))

    def test_partial_failure_persists_successes(self, tmp_path):
        cat = synthetic_catalog(3, seed=0, embed=False)
        target = cat.courses[1].embedding_text

        class FlakyProvider(MockProvider):
            def _embed(self, text):
                if text == target:
                    raise ProviderError("backend down")
                return super()._embed(text)

        cache = EmbeddingCache(tmp_path / "cache.jsonl")
        provider = FlakyProvider(seed=1, dimension=8)
        with pytest.raises(ProviderError) as exc:
            embed_catalog(cat, provider, batch_size=1, cache=cache)
        assert cat.courses[1].course_id in str(exc.value)
        assert len(cache) == 2

        healthy = MockProvider(seed=1, dimension=8)
        embedded = embed_catalog(cat, healthy, batch_size=1, cache=cache)
        assert embedded.fully_embedded()
        # only the failed course needed a fresh provider call
        assert len([c for c in healthy.calls if c[0] == "embed"]) == 1


class TestCacheKey:
    def test_key_depends_on_provider_model_text(self):
        k = EmbeddingCache.key
        assert k("p", "m", "t") == k("p", "m", "t")
        assert len({k("p", "m", "t"), k("p2", "m", "t"), k("p", "m2", "t"), k("p", "m", "t2")}) == 4
