"""Course catalog: records, loading, persistence, level filtering, and embedding.

A catalog is an ordered, immutable-after-load collection of courses. Embeddings
live on the records as float64 numpy vectors; all embedded courses in one
catalog share a single dimension (1536 for ada-002-style embeddings).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    EmptyCourseError,
    NonFiniteVectorError,
    ParseError,
    ProviderError,
    ZeroVectorError,
)

if TYPE_CHECKING:
    from .provider import Provider

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 1536

_COURSE_NUMBER = re.compile(r"(\d{3,})")


def as_embedding(values: Sequence[float] | np.ndarray, dimension: int | None = None) -> np.ndarray:
    """Validate and return an embedding as a float64 numpy vector.

    Rejects non-finite components and zero vectors; enforces ``dimension``
    when given.
    """
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {vec.shape}")
    if dimension is not None and vec.shape[0] != dimension:
        raise DimensionMismatchError(dimension, vec.shape[0])
    if not np.all(np.isfinite(vec)):
        raise NonFiniteVectorError("embedding contains NaN or Inf")
    if not np.linalg.norm(vec) > 0.0:
        raise ZeroVectorError("embedding has zero norm")
    return vec


@dataclass(frozen=True)
class CourseRecord:
    """One course as stored in the catalog.

    ``level`` is the hundreds bucket (100, 200, ...). It is stored explicitly
    rather than re-derived from ``course_id`` because catalogs contain
    non-numeric course codes; a mismatch against a numeric code only warns.
    """

    course_id: str
    level: int
    subject: str
    title: str
    description: str = ""
    embedding: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.course_id:
            raise ValueError("course_id must be non-empty")
        if self.level < 0 or self.level % 100 != 0:
            raise ValueError(f"level must be a non-negative multiple of 100, got {self.level}")
        derived = derive_level(self.course_id)
        if derived is not None and derived != self.level:
            logger.warning(
                "course %s: stored level %d disagrees with level %d derived from its number",
                self.course_id,
                self.level,
                derived,
            )

    @property
    def embedding_text(self) -> str:
        """Text to embed: the description, or the title when the description is empty."""
        text = self.description.strip()
        return text if text else self.title.strip()

    def with_embedding(self, embedding: np.ndarray) -> "CourseRecord":
        return replace(self, embedding=as_embedding(embedding))


def derive_level(course_id: str) -> int | None:
    """Hundreds bucket of the numeric part of a course id, if it has one."""
    m = _COURSE_NUMBER.search(course_id)
    if m is None:
        return None
    return (int(m.group(1)) // 100) * 100


@dataclass(frozen=True)
class LevelFilter:
    """Course-level constraint: everything, an inclusive hundreds range, or a minimum.

    Use the constructors ``all_levels``, ``between`` and ``at_least`` rather
    than the raw fields.
    """

    lo: int | None = None
    hi: int | None = None

    @classmethod
    def all_levels(cls) -> "LevelFilter":
        return cls()

    @classmethod
    def between(cls, lo: int, hi: int) -> "LevelFilter":
        if lo % 100 or hi % 100:
            raise ValueError("level bounds must be multiples of 100")
        if lo > hi:
            raise ValueError(f"range lower bound {lo} exceeds upper bound {hi}")
        return cls(lo=lo, hi=hi)

    @classmethod
    def at_least(cls, lo: int) -> "LevelFilter":
        if lo % 100:
            raise ValueError("level bound must be a multiple of 100")
        return cls(lo=lo, hi=None)

    @classmethod
    def parse(cls, spec: str) -> "LevelFilter":
        """Parse "all", "LO-HI" (e.g. "100-200") or "LO+" (e.g. "500+")."""
        spec = spec.strip().lower()
        if spec == "all":
            return cls.all_levels()
        if spec.endswith("+"):
            return cls.at_least(int(spec[:-1]))
        if "-" in spec:
            lo, hi = spec.split("-", 1)
            return cls.between(int(lo), int(hi))
        raise ValueError(f"unrecognized level filter {spec!r}")

    def matches(self, level: int) -> bool:
        if self.lo is not None and level < self.lo:
            return False
        if self.hi is not None and level > self.hi:
            return False
        return True

    def __str__(self) -> str:
        if self.lo is None and self.hi is None:
            return "all"
        if self.hi is None:
            return f"{self.lo}+"
        return f"{self.lo}-{self.hi}"


@dataclass(frozen=True)
class Catalog:
    """Ordered course collection with a single embedding dimension.

    ``dimension`` is None until at least one course is embedded.
    ``source_digest`` is a content hash over ids and texts, used to key
    embedding caches and detect stale artifacts.
    """

    courses: tuple[CourseRecord, ...]
    dimension: int | None = None
    source_digest: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for c in self.courses:
            if c.course_id in seen:
                raise DuplicateIdError(c.course_id)
            seen.add(c.course_id)
        dim = self.dimension
        for c in self.courses:
            if c.embedding is None:
                continue
            if dim is None:
                dim = c.embedding.shape[0]
            elif c.embedding.shape[0] != dim:
                raise DimensionMismatchError(dim, c.embedding.shape[0], where=c.course_id)
        if dim != self.dimension:
            object.__setattr__(self, "dimension", dim)
        if not self.source_digest:
            object.__setattr__(self, "source_digest", _content_digest(self.courses))

    def __len__(self) -> int:
        return len(self.courses)

    def __iter__(self):
        return iter(self.courses)

    def get(self, course_id: str) -> CourseRecord | None:
        return self._by_id().get(course_id)

    def _by_id(self) -> dict[str, CourseRecord]:
        # Lazy index; the dataclass is frozen so go through __dict__.
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = {c.course_id: c for c in self.courses}
            self.__dict__["_index"] = cached
        return cached

    @property
    def subjects(self) -> list[str]:
        """Distinct subject codes in first-appearance order."""
        seen: dict[str, None] = {}
        for c in self.courses:
            seen.setdefault(c.subject, None)
        return list(seen)

    def fully_embedded(self) -> bool:
        return all(c.embedding is not None for c in self.courses)


def _content_digest(courses: Iterable[CourseRecord]) -> str:
    h = hashlib.sha256()
    for c in courses:
        h.update(f"{c.course_id}\x1f{c.level}\x1f{c.subject}\x1f{c.title}\x1f{c.description}\x1e".encode())
    return h.hexdigest()


_REQUIRED_FIELDS = ("course_id", "level", "subject", "title", "description")


def _record_from_mapping(row: dict, line: int, embedding: object) -> CourseRecord:
    missing = [k for k in _REQUIRED_FIELDS if row.get(k) in (None, "") and k != "description"]
    if missing:
        raise ParseError(f"missing required field(s) {missing}", line=line)
    try:
        level = int(row["level"])
    except (TypeError, ValueError):
        raise ParseError(f"level {row.get('level')!r} is not an integer", line=line) from None
    vec = None
    if embedding is not None:
        try:
            vec = as_embedding(embedding)
        except (ValueError, TypeError, ZeroVectorError, NonFiniteVectorError) as exc:
            raise ParseError(f"bad embedding: {exc}", line=line) from None
    try:
        return CourseRecord(
            course_id=str(row["course_id"]),
            level=level,
            subject=str(row["subject"]),
            title=str(row["title"]),
            description=str(row.get("description") or ""),
            embedding=vec,
        )
    except ValueError as exc:
        raise ParseError(str(exc), line=line) from None


def load_catalog(path: str | Path, format: str | None = None) -> Catalog:
    """Load a catalog from a JSONL or CSV file.

    ``format`` defaults from the file suffix. Duplicate course ids and
    inconsistent embedding dimensions are rejected; input order is preserved.
    """
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unsupported format {fmt!r}")

    records: list[CourseRecord] = []
    seen: set[str] = set()
    dim: int | None = None

    def admit(rec: CourseRecord, line: int) -> None:
        nonlocal dim
        if rec.course_id in seen:
            raise DuplicateIdError(rec.course_id, line=line)
        if rec.embedding is not None:
            if dim is None:
                dim = rec.embedding.shape[0]
            elif rec.embedding.shape[0] != dim:
                raise DimensionMismatchError(dim, rec.embedding.shape[0], where=rec.course_id)
        seen.add(rec.course_id)
        records.append(rec)

    if fmt == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}", line=line_no) from None
                if not isinstance(row, dict):
                    raise ParseError("row is not a JSON object", line=line_no)
                admit(_record_from_mapping(row, line_no, row.get("embedding")), line_no)
    else:
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                rows = []
            else:
                rows = reader
            for row in rows:
                line_no = reader.line_num
                raw = (row.get("embedding") or "").strip()
                embedding = None
                if raw:
                    try:
                        embedding = json.loads(raw)
                    except json.JSONDecodeError:
                        raise ParseError("embedding column is not a JSON array", line=line_no) from None
                admit(_record_from_mapping(row, line_no, embedding), line_no)

    return Catalog(courses=tuple(records), dimension=dim)


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    """Write a catalog as JSONL, one course per line, embeddings as float arrays.

    Python's float repr round-trips exactly, so load(save(c)) reproduces the
    embeddings bit-for-bit.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for c in catalog:
            row = {
                "course_id": c.course_id,
                "level": c.level,
                "subject": c.subject,
                "title": c.title,
                "description": c.description,
                "embedding": None if c.embedding is None else c.embedding.tolist(),
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def filter_by_level(catalog: Catalog, level_filter: LevelFilter) -> Catalog:
    """View of the catalog containing exactly the courses matching the filter, in order."""
    kept = tuple(c for c in catalog if level_filter.matches(c.level))
    return Catalog(courses=kept, dimension=catalog.dimension, source_digest=catalog.source_digest)


class EmbeddingCache:
    """JSONL-backed embedding cache keyed by (provider id, model id, text digest).

    Append-only on disk; safe for concurrent writers within one process.
    Re-running ``embed_catalog`` against the same cache re-bills nothing.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, np.ndarray] = {}
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    row = json.loads(line)
                    self._entries[row["key"]] = np.asarray(row["embedding"], dtype=np.float64)

    @staticmethod
    def key(provider_id: str, model_id: str, text: str) -> str:
        digest = hashlib.sha256(text.encode()).hexdigest()
        return hashlib.sha256(f"{provider_id}\x1f{model_id}\x1f{digest}".encode()).hexdigest()

    def get(self, key: str) -> np.ndarray | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, embedding: np.ndarray) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = embedding
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "embedding": embedding.tolist()}) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


def embed_catalog(
    catalog: Catalog,
    provider: "Provider",
    batch_size: int = 8,
    cache: EmbeddingCache | None = None,
) -> Catalog:
    """Return a catalog in which every course carries an embedding.

    Courses already embedded are skipped, so the call is idempotent. Up to
    ``batch_size`` provider requests run concurrently. Successful embeddings
    are persisted to ``cache`` (when given) before any failure is raised, so
    an interrupted run resumes without repeating provider calls.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    pending = [c for c in catalog if c.embedding is None]
    if not pending:
        return catalog

    for c in pending:
        if not c.embedding_text:
            raise EmptyCourseError(c.course_id)

    results: dict[str, np.ndarray] = {}
    failures: list[tuple[str, Exception]] = []

    def fetch(course: CourseRecord) -> None:
        key = None
        if cache is not None:
            key = EmbeddingCache.key(provider.provider_id, provider.embedding_model, course.embedding_text)
            hit = cache.get(key)
            if hit is not None:
                results[course.course_id] = hit
                return
        try:
            vec = provider.embed(course.embedding_text)
        except Exception as exc:  # noqa: BLE001 - collected and re-raised below
            failures.append((course.course_id, exc))
            return
        results[course.course_id] = vec
        if cache is not None and key is not None:
            cache.put(key, vec)

    with ThreadPoolExecutor(max_workers=batch_size) as pool:
        list(pool.map(fetch, pending))

    if failures:
        failed_ids = sorted(cid for cid, _ in failures)
        first_id, first_exc = failures[0]
        raise ProviderError(
            f"embedding failed for {len(failed_ids)} course(s), first {first_id!r}: {first_exc}",
            stage="catalog-embedding",
        )

    dim = catalog.dimension
    embedded = []
    for c in catalog:
        if c.embedding is not None:
            embedded.append(c)
            continue
        vec = as_embedding(results[c.course_id])
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise DimensionMismatchError(dim, vec.shape[0], where=c.course_id)
        embedded.append(c.with_embedding(vec))
    return Catalog(courses=tuple(embedded), dimension=dim, source_digest=catalog.source_digest)
