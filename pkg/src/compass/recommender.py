"""The core two-stage pipeline: ideal description, context retrieval, grounded recommendation.

Stage 1 asks a fast chat model to write an idealized catalog-style course
description for the student's query; its embedding is the retrieval query.
Stage 2 hands the retrieved context to a stronger chat model, which returns
ten markdown recommendations that are parsed and grounded against the
context (hallucinated ids are dropped, never served).
"""

from __future__ import annotations

import hashlib
import logging
import re
import time
from dataclasses import dataclass, field
from importlib import resources

from .catalog import LevelFilter
from .errors import EmptyCorpusError, ParseFailureError, ProviderError
from .index import ScoredCourse, SimilarityIndex, top_k
from .provider import ChatMessage, ChatRequest, Provider, chat_request

logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_SIZE = 50

MAX_QUERY_CHARS = 4000

CONFIDENCE_LEVELS = ("High", "Medium", "Low")


@dataclass(frozen=True)
class StudentQuery:
    """Natural-language interests/background plus an optional level constraint."""

    text: str
    level_filter: LevelFilter = field(default_factory=LevelFilter.all_levels)

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise ValueError("query text must be non-empty")
        if len(self.text) > MAX_QUERY_CHARS:
            raise ValueError(f"query text exceeds {MAX_QUERY_CHARS} characters")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


@dataclass(frozen=True)
class IdealDescription:
    """Stage-1 output: the hypothetical course description used as the retrieval query."""

    text: str
    source_query_digest: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("ideal description is empty")


@dataclass(frozen=True)
class ContextBundle:
    """The retrieved context: scored courses in rank order plus their prompt rendering."""

    ideal: IdealDescription
    courses: tuple[ScoredCourse, ...]
    context_text: str

    @property
    def course_ids(self) -> list[str]:
        return [s.course_id for s in self.courses]


@dataclass(frozen=True)
class Recommendation:
    course_id: str
    rationale: str
    confidence: str

    def __post_init__(self) -> None:
        if self.confidence not in CONFIDENCE_LEVELS:
            raise ValueError(f"confidence must be one of {CONFIDENCE_LEVELS}")
        if not self.rationale.strip():
            raise ValueError("rationale must be non-empty")


@dataclass(frozen=True)
class Timing:
    retrieval_s: float
    total_s: float

    def __post_init__(self) -> None:
        if self.retrieval_s > self.total_s:
            raise ValueError("retrieval time cannot exceed total time")


@dataclass(frozen=True)
class RecommendationResponse:
    """Everything one recommendation call produced, including diagnostics.

    ``trace`` lists the pipeline stages in execution order; ``prompt_digests``
    pins the exact template versions that built the prompts.
    """

    recommendations: tuple[Recommendation, ...]
    context: ContextBundle
    raw_output: str
    timing: Timing
    prompt_digests: dict[str, str]
    warnings: tuple[str, ...] = ()
    trace: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ids = [r.course_id for r in self.recommendations]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate course ids in recommendations")
        known = set(self.context.course_ids)
        stray = [i for i in ids if i not in known]
        if stray:
            raise ValueError(f"recommendation(s) outside retrieved context: {stray}")

    def to_dict(self, include_raw: bool = False) -> dict:
        out = {
            "recommendations": [
                {"course_id": r.course_id, "rationale": r.rationale, "confidence": r.confidence}
                for r in self.recommendations
            ],
            "ideal_description": self.context.ideal.text,
            "context": [
                {"course_id": s.course_id, "similarity": s.similarity, "rank": s.rank}
                for s in self.context.courses
            ],
            "timing": {
                "retrieval_ms": round(self.timing.retrieval_s * 1000.0, 3),
                "total_ms": round(self.timing.total_s * 1000.0, 3),
            },
            "prompt_digests": dict(self.prompt_digests),
            "warnings": list(self.warnings),
        }
        if include_raw:
            out["raw_output"] = self.raw_output
        return out


def _load_template(name: str) -> tuple[str, str, str]:
    text = resources.files("compass").joinpath(f"prompts/{name}").read_text(encoding="utf-8")
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    system, _, user = text.partition("\n---\n")
    return system.strip(), user.strip() + "\n", digest


@dataclass(frozen=True)
class PromptTemplates:
    """The two stage templates, loaded from versioned files shipped with the package."""

    ideal_system: str
    ideal_user: str
    recommend_system: str
    recommend_user: str
    digests: dict[str, str]

    @classmethod
    def load(
        cls,
        ideal_name: str = "ideal_description_v1.md",
        recommend_name: str = "recommend_v1.md",
    ) -> "PromptTemplates":
        ideal_system, ideal_user, ideal_digest = _load_template(ideal_name)
        rec_system, rec_user, rec_digest = _load_template(recommend_name)
        return cls(
            ideal_system=ideal_system,
            ideal_user=ideal_user,
            recommend_system=rec_system,
            recommend_user=rec_user,
            digests={ideal_name: ideal_digest, recommend_name: rec_digest},
        )


# Generic course-id shape (subject code + number) used to find blocks whose id
# is not in the context, so hallucinations are consumed and reported.
_ID_TOKEN = r"[A-Z][A-Z&/]{1,11}\s?\d{2,4}[A-Z]?"
_CONFIDENCE = re.compile(r"\b(high|medium|low)\b", re.IGNORECASE)
_DECORATION = re.compile(r"^\s*(?:[#>*+-]+|\d+[.)])?\s*(?:\*\*|__)?\s*")
_RATIONALE_LABEL = re.compile(r"^\s*(?:\*\*|__)?rationale(?:\*\*|__)?\s*[:-]\s*", re.IGNORECASE)


def _block_start_pattern(context_ids: list[str]) -> re.Pattern[str]:
    alternatives = sorted((re.escape(cid) for cid in context_ids), key=len, reverse=True)
    alternatives.append(_ID_TOKEN)
    return re.compile(r"^\s*(?:[#>*+-]+|\d+[.)])?\s*(?:\*\*|__)?\s*(" + "|".join(alternatives) + r")\b")


def parse_recommendations(
    raw: str,
    context: ContextBundle,
    warnings: list[str] | None = None,
) -> list[Recommendation]:
    """Recover grounded recommendations from model markdown.

    Tolerant grammar: a block starts at any line that opens (after markdown
    decoration) with a course id, and runs to the next such line. Within a
    block the confidence is taken from a line labeled "confidence" when
    present, otherwise from the last standalone high/medium/low token; the
    rationale is the remaining text. Ids absent from the context are dropped
    with a warning, duplicates keep the first occurrence, order of appearance
    is preserved, and the result is capped at ten entries. Raises
    ParseFailureError when no block can be recovered at all.
    """
    sink = warnings if warnings is not None else []
    known = set(context.course_ids)
    start = _block_start_pattern(context.course_ids)

    lines = raw.splitlines()
    starts = [(i, m.group(1)) for i, line in enumerate(lines) if (m := start.match(line))]
    if not starts:
        raise ParseFailureError("no recommendation blocks found in model output", raw_output=raw)

    results: list[Recommendation] = []
    seen: set[str] = set()
    for pos, (line_no, course_id) in enumerate(starts):
        end = starts[pos + 1][0] if pos + 1 < len(starts) else len(lines)
        block = lines[line_no:end]
        if course_id not in known:
            sink.append(f"dropped {course_id!r}: not in retrieved context")
            continue
        if course_id in seen:
            sink.append(f"dropped duplicate recommendation of {course_id!r}")
            continue

        confidence, confidence_line = _find_confidence(block)
        if confidence is None:
            sink.append(f"dropped {course_id!r}: no confidence level found")
            continue
        rationale = _extract_rationale(block, course_id, confidence_line)
        if not rationale:
            sink.append(f"dropped {course_id!r}: no rationale text found")
            continue

        seen.add(course_id)
        if len(results) == 10:
            sink.append(f"dropped {course_id!r}: past the ten-recommendation cap")
            continue
        results.append(Recommendation(course_id=course_id, rationale=rationale, confidence=confidence))

    if not results:
        raise ParseFailureError("no usable recommendation blocks survived parsing", raw_output=raw)
    for message in sink:
        logger.warning("parse_recommendations: %s", message)
    return results


def _find_confidence(block: list[str]) -> tuple[str | None, int | None]:
    labeled = None
    for i, line in enumerate(block):
        if "confidence" in line.lower():
            m = _CONFIDENCE.search(line)
            if m:
                labeled = (m.group(1).capitalize(), i)
    if labeled:
        return labeled
    last = None
    for i, line in enumerate(block):
        for m in _CONFIDENCE.finditer(line):
            last = (m.group(1).capitalize(), i)
    return last if last else (None, None)


def _extract_rationale(block: list[str], course_id: str, confidence_line: int | None) -> str:
    parts: list[str] = []
    head = block[0]
    head = _DECORATION.sub("", head)
    if head.startswith(course_id):
        head = head[len(course_id):]
    head = head.strip(" *_:-.–")
    if head:
        parts.append(head)
    for i, line in enumerate(block[1:], start=1):
        if i == confidence_line:
            continue
        parts.append(line.strip())
    text = " ".join(p for p in parts if p)
    text = _RATIONALE_LABEL.sub("", text).strip()
    return re.sub(r"\s+", " ", text)


def format_context(courses: tuple[ScoredCourse, ...] | list[ScoredCourse]) -> str:
    """One block per course in rank order: "<id>: <title>" then the description."""
    blocks = []
    for scored in courses:
        c = scored.course
        description = re.sub(r"\n\s*\n", "\n", c.description.strip())
        blocks.append(f"{c.course_id}: {c.title}\n{description}\n")
    return "\n".join(blocks)


_REPROMPT_REMINDER = (
    "Your previous answer could not be parsed. Reply again as a numbered markdown "
    "list of up to ten entries, each with the course identifier in bold, a "
    "'Rationale:' line, and a 'Confidence: High/Medium/Low' line. Use only courses "
    "from the candidate list."
)


class Recommender:
    """Immutable pipeline configuration over a shared index and provider.

    Any number of ``recommend`` calls may run concurrently; each call is
    independent.
    """

    def __init__(
        self,
        index: SimilarityIndex,
        provider: Provider,
        templates: PromptTemplates | None = None,
        k: int = DEFAULT_CONTEXT_SIZE,
    ):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.index = index
        self.provider = provider
        self.templates = templates or PromptTemplates.load()
        self.k = k

    def generate_ideal_description(self, query: StudentQuery) -> IdealDescription:
        """Stage 1: idealized catalog-style description of the perfect course."""
        request = chat_request(
            system=self.templates.ideal_system,
            user=self.templates.ideal_user.format(query=query.text),
            temperature=0.0,
            model_id=self.provider.generation_model,
        )
        text = self._chat(request, stage="ideal-description")
        return IdealDescription(text=text.strip(), source_query_digest=query.digest)

    def retrieve_context(
        self,
        query: StudentQuery,
        k: int | None = None,
        trace: list[str] | None = None,
    ) -> ContextBundle:
        """Stages 1+2 of retrieval: ideal description, its embedding, top-k search."""
        k = self.k if k is None else k
        trace = trace if trace is not None else []
        ideal = self.generate_ideal_description(query)
        trace.append("ideal-description")
        try:
            query_embedding = self.provider.embed(ideal.text)
        except ProviderError as exc:
            raise _tag(exc, "query-embedding") from exc
        trace.append("query-embedding")
        scored = top_k(self.index, query_embedding, k=k, level_filter=query.level_filter)
        trace.append("similarity-search")
        return ContextBundle(
            ideal=ideal,
            courses=tuple(scored),
            context_text=format_context(scored),
        )

    def recommend(self, query: StudentQuery, k: int | None = None) -> RecommendationResponse:
        """Full pipeline: retrieve context, ask for ten grounded picks, parse."""
        trace: list[str] = []
        t_start = time.perf_counter()
        bundle = self.retrieve_context(query, k=k, trace=trace)
        t_retrieval = time.perf_counter() - t_start
        if not bundle.courses:
            raise EmptyCorpusError(
                f"level filter {query.level_filter} leaves no courses to recommend from"
            )

        request = chat_request(
            system=self.templates.recommend_system,
            user=self.templates.recommend_user.format(context=bundle.context_text, query=query.text),
            temperature=0.0,
            model_id=self.provider.reasoning_model,
        )
        raw = self._chat(request, stage="recommendation")
        trace.append("recommendation")

        warnings: list[str] = []
        try:
            recommendations = parse_recommendations(raw, bundle, warnings=warnings)
        except ParseFailureError:
            warnings.append("first recommendation response unparseable; reprompted once")
            retry_request = ChatRequest(
                messages=request.messages
                + (ChatMessage("assistant", raw), ChatMessage("user", _REPROMPT_REMINDER)),
                temperature=0.0,
                model_id=self.provider.reasoning_model,
            )
            raw = self._chat(retry_request, stage="recommendation-reprompt")
            trace.append("recommendation-reprompt")
            recommendations = parse_recommendations(raw, bundle, warnings=warnings)
        trace.append("parse")

        total = time.perf_counter() - t_start
        return RecommendationResponse(
            recommendations=tuple(recommendations),
            context=bundle,
            raw_output=raw,
            timing=Timing(retrieval_s=t_retrieval, total_s=total),
            prompt_digests=dict(self.templates.digests),
            warnings=tuple(warnings),
            trace=tuple(trace),
        )

    def _chat(self, request: ChatRequest, stage: str) -> str:
        try:
            return self.provider.chat(request)
        except ProviderError as exc:
            raise _tag(exc, stage) from exc


def _tag(exc: ProviderError, stage: str) -> ProviderError:
    if exc.stage is not None:
        return exc
    return type(exc)(str(exc), stage=stage)
