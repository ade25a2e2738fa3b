"""Deterministic synthetic catalogs for tests, demos, and benchmarks."""

from __future__ import annotations

import numpy as np

from .catalog import Catalog, CourseRecord

_TOPICS = (
    "data analysis", "signal processing", "medieval history", "organic synthesis",
    "game theory", "fluid dynamics", "narrative writing", "machine perception",
    "public policy", "population ecology", "number theory", "circuit design",
)

DEFAULT_SUBJECTS = ("AAAA", "BBBB", "CCCC", "DDDD", "EEEE", "FFFF", "GGGG", "HHHH")
DEFAULT_LEVELS = (100, 200, 300, 400, 500, 600)


def synthetic_catalog(
    n_courses: int,
    dimension: int = 64,
    seed: int = 0,
    subjects: tuple[str, ...] = DEFAULT_SUBJECTS,
    levels: tuple[int, ...] = DEFAULT_LEVELS,
    embed: bool = True,
) -> Catalog:
    """A catalog of ``n_courses`` with random unit embeddings, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    courses = []
    counters: dict[tuple[str, int], int] = {}
    for i in range(n_courses):
        subject = subjects[int(rng.integers(len(subjects)))]
        level = levels[int(rng.integers(len(levels)))]
        count = counters.get((subject, level), 0)
        counters[(subject, level)] = count + 1
        # Stay within the level's hundreds bucket; letter suffix keeps ids
        # unique once a bucket holds more than 100 courses.
        number = level + (count % 100)
        suffix = "" if count < 100 else chr(ord("A") + count // 100 - 1)
        topic = _TOPICS[i % len(_TOPICS)]
        embedding = None
        if embed:
            vec = rng.standard_normal(dimension)
            embedding = vec / np.linalg.norm(vec)
        courses.append(
            CourseRecord(
                course_id=f"{subject} {number}{suffix}",
                level=level,
                subject=subject,
                title=f"Topics in {topic} {i}",
                description=f"A synthetic course covering {topic}, instance {i}.",
                embedding=embedding,
            )
        )
    return Catalog(courses=tuple(courses))
