"""Chat-completion and embedding providers.

Two implementations share one interface: an OpenAI-compatible HTTPS client
for live runs, and a fully deterministic mock whose outputs are pure
functions of (inputs, seed) so the entire pipeline and every experiment can
run offline and reproduce bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .catalog import DEFAULT_DIMENSION, as_embedding
from .errors import (
    AuthError,
    EmptyTextError,
    MalformedResponseError,
    ProviderError,
    ProviderTimeoutError,
    RateLimitedError,
)

logger = logging.getLogger(__name__)

VALID_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call. ``model_id`` empty means the provider default."""

    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int | None = None
    model_id: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        for m in self.messages:
            if m.role not in VALID_ROLES:
                raise ValueError(f"invalid message role {m.role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    @property
    def text(self) -> str:
        """All message contents joined, used for digests and mock behavior."""
        return "\n".join(m.content for m in self.messages)


def chat_request(system: str, user: str, temperature: float = 0.0, model_id: str = "") -> ChatRequest:
    return ChatRequest(
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        temperature=temperature,
        model_id=model_id,
    )


@dataclass(frozen=True)
class ProviderConfig:
    """Connection settings for an OpenAI-compatible endpoint.

    The API key is read from the environment variable named by
    ``api_key_env``; keys never appear in config files.
    """

    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    generation_model: str = "gpt-3.5-turbo"
    reasoning_model: str = "gpt-4o"
    embedding_model: str = "text-embedding-ada-002"
    timeout: float = 60.0
    max_retries: int = 2
    embedding_dimension: int = DEFAULT_DIMENSION
    in_flight_cap: int = 4

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.in_flight_cap < 1:
            raise ValueError("in_flight_cap must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> "ProviderConfig":
        """Load from a TOML or JSON mapping of the field names above."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".toml":
            try:
                import tomllib  # Python >= 3.11
            except ImportError:
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown provider config keys: {sorted(unknown)}")
        return cls(**data)


class Provider(ABC):
    """Common surface for chat + embedding backends.

    Concurrent callers are admitted up to ``in_flight_cap`` at a time; the
    recommender and service never branch on which implementation they hold.
    """

    provider_id: str = "abstract"
    generation_model: str = ""
    reasoning_model: str = ""
    embedding_model: str = ""
    embedding_dimension: int = DEFAULT_DIMENSION

    def __init__(self, in_flight_cap: int = 4):
        self._gate = threading.BoundedSemaphore(in_flight_cap)

    def chat(self, request: ChatRequest) -> str:
        with self._gate:
            return self._chat(request)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyTextError("cannot embed empty text")
        with self._gate:
            return self._embed(text)

    @abstractmethod
    def _chat(self, request: ChatRequest) -> str: ...

    @abstractmethod
    def _embed(self, text: str) -> np.ndarray: ...


class OpenAIProvider(Provider):
    """OpenAI-compatible JSON-over-HTTPS client with bounded retries.

    Transient transport failures, 429s and 5xx responses are retried with
    exponential backoff up to ``config.max_retries`` extra attempts.
    ``transport`` is injectable for tests (httpx.MockTransport).
    """

    provider_id = "openai"

    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None, backoff_base: float = 0.5):
        super().__init__(config.in_flight_cap)
        self.config = config
        self.generation_model = config.generation_model
        self.reasoning_model = config.reasoning_model
        self.embedding_model = config.embedding_model
        self.embedding_dimension = config.embedding_dimension
        self._backoff_base = backoff_base
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise AuthError(f"environment variable {self.config.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _post(self, path: str, payload: dict) -> dict:
        attempts = self.config.max_retries + 1
        last_error: Exception | None = None
        last_status: int | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self._backoff_base * (2 ** (attempt - 1)))
            try:
                response = self._client.post(path, json=payload, headers=self._headers())
            except httpx.TimeoutException as exc:
                last_error, last_status = exc, None
                continue
            except httpx.TransportError as exc:
                last_error, last_status = exc, None
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"authentication failed ({response.status_code})")
            if response.status_code == 429 or response.status_code >= 500:
                last_error = ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
                last_status = response.status_code
                continue
            if response.status_code != 200:
                raise ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                return response.json()
            except json.JSONDecodeError:
                raise MalformedResponseError("response body is not JSON") from None
        if isinstance(last_error, httpx.TimeoutException):
            raise ProviderTimeoutError(f"timed out after {attempts} attempts") from last_error
        if last_status == 429:
            raise RateLimitedError(f"rate limited after {attempts} attempts") from last_error
        raise ProviderError(f"request failed after {attempts} attempts: {last_error}")

    def _chat(self, request: ChatRequest) -> str:
        payload: dict = {
            "model": request.model_id or self.generation_model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        data = self._post("/chat/completions", payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise MalformedResponseError("chat response missing choices[0].message.content") from None
        if not isinstance(content, str):
            raise MalformedResponseError("chat content is not a string")
        return content

    def _embed(self, text: str) -> np.ndarray:
        data = self._post("/embeddings", {"model": self.embedding_model, "input": text})
        try:
            values = data["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError):
            raise MalformedResponseError("embedding response missing data[0].embedding") from None
        return as_embedding(values, dimension=self.embedding_dimension)


def _seeded_rng(*parts: object) -> np.random.Generator:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


# Marker the recommendation template puts in front of the retrieved context;
# the mocks use it to tell the two pipeline stages apart.
CONTEXT_MARKER = "Candidate courses:"
QUERY_MARKER = "Student query:"

_INTEREST_CLAUSE = re.compile(r"interest(?:ed|s)?\s+in\s+(.+?)(?:[.!?\n]|$)", re.IGNORECASE)

_CONFIDENCE_CYCLE = ("High", "Medium", "Low")


def extract_context_ids(prompt_text: str) -> list[str]:
    """Course ids from the context section of a recommendation prompt, in rank order."""
    if CONTEXT_MARKER not in prompt_text:
        return []
    region = prompt_text.split(CONTEXT_MARKER, 1)[1]
    if QUERY_MARKER in region:
        region = region.split(QUERY_MARKER, 1)[0]
    ids = []
    for block in region.split("\n\n"):
        first = block.strip().splitlines()[0] if block.strip() else ""
        if ":" in first:
            ids.append(first.split(":", 1)[0].strip())
    return ids


def _interest_topic(query_text: str) -> str:
    """The "interested in ..." clause when present, else the query minus questions.

    Keying the mock's stage-1 output on the interest clause keeps it blind to
    phrasing outside that clause (e.g. demographic descriptors), which is what
    the bias experiment's null case measures.
    """
    m = _INTEREST_CLAUSE.search(query_text)
    if m:
        return m.group(1).strip().rstrip(".")
    sentences = re.split(r"(?<=[.!?])\s+", query_text.strip())
    kept = [s for s in sentences if not s.rstrip().endswith("?")]
    topic = " ".join(kept).strip().rstrip(".")
    return topic if topic else query_text.strip()


_IDEAL_TEMPLATE = (
    "Examines {topic} through foundational concepts, formal methods, and guided practice. "
    "Students survey the central models and vocabulary of {topic}, analyze representative "
    "problems, and construct working solutions in structured exercises. Weekly readings "
    "pair classic results with current applications, and discussion sections build the "
    "ability to evaluate competing approaches on evidence. A term project asks students "
    "to frame a question related to {topic}, select appropriate methods, carry out the "
    "analysis, and communicate findings to a technical audience in written and oral form. "
    "Intended for students seeking a rigorous introduction with substantial hands-on "
    "practice; no prior exposure is assumed beyond general academic preparation."
)


class MockProvider(Provider):
    """Deterministic offline stand-in for both hosted models.

    - ``embed`` returns a seeded pseudo-random unit vector keyed by a digest
      of the text: identical text gives an identical vector.
    - stage-1 chats (no context block in the prompt) return a catalog-style
      course description derived from the query's interest clause.
    - stage-2 chats return well-formed markdown recommending the first ten
      course ids found in the prompt's context block, confidence cycling
      High/Medium/Low.

    Every output is a pure function of (inputs, seed). ``calls`` records
    (kind, detail) tuples in order, for tests that assert stage sequencing or
    that no calls happened.
    """

    provider_id = "mock"
    generation_model = "mock-generation-v1"
    reasoning_model = "mock-reasoning-v1"

    def __init__(self, seed: int = 0, dimension: int = DEFAULT_DIMENSION, in_flight_cap: int = 4):
        super().__init__(in_flight_cap)
        self.seed = seed
        self.embedding_dimension = dimension
        self.embedding_model = f"mock-embedding-{dimension}d-v1"
        self.calls: list[tuple[str, str]] = []
        self._call_lock = threading.Lock()

    def _record(self, kind: str, detail: str) -> None:
        with self._call_lock:
            self.calls.append((kind, detail))

    def _embed(self, text: str) -> np.ndarray:
        self._record("embed", text[:60])
        rng = _seeded_rng("embed", self.seed, text)
        vec = rng.standard_normal(self.embedding_dimension)
        return vec / np.linalg.norm(vec)

    def _chat(self, request: ChatRequest) -> str:
        prompt = request.text
        ids = extract_context_ids(prompt)
        if ids:
            self._record("chat", "recommend")
            return self._recommend_markdown(ids, prompt)
        self._record("chat", "ideal-description")
        user_text = request.messages[-1].content
        return _IDEAL_TEMPLATE.format(topic=_interest_topic(user_text))

    def _recommend_markdown(self, context_ids: list[str], prompt: str) -> str:
        chosen = self._choose(context_ids, prompt)
        lines = ["## Recommended courses", ""]
        for i, cid in enumerate(chosen, start=1):
            confidence = _CONFIDENCE_CYCLE[(i - 1) % len(_CONFIDENCE_CYCLE)]
            lines.append(f"{i}. **{cid}**")
            lines.append(
                f"   Rationale: Sits close to the ideal description for this query and covers the requested ground (pick {i})."
            )
            lines.append(f"   Confidence: {confidence}")
            lines.append("")
        return "\n".join(lines)

    def _choose(self, context_ids: list[str], prompt: str) -> list[str]:
        return context_ids[:10]


class StochasticMockProvider(MockProvider):
    """Mock whose stage-2 choice is a seeded weighted sample instead of top-10.

    Samples 10 of the ``pool`` highest-ranked context courses without
    replacement, weighted by 1/rank. The sample is keyed by (seed, prompt
    digest, invocation counter), so repeated trials of one query differ while
    a rerun of the whole experiment with the same seed reproduces every trial
    bit-for-bit (trials must execute in a fixed order).
    """

    provider_id = "mock-stochastic"

    def __init__(self, seed: int = 0, dimension: int = DEFAULT_DIMENSION, pool: int = 25, picks: int = 10, in_flight_cap: int = 4):
        super().__init__(seed=seed, dimension=dimension, in_flight_cap=in_flight_cap)
        self.pool = pool
        self.picks = picks
        self._counter = 0

    def _choose(self, context_ids: list[str], prompt: str) -> list[str]:
        with self._call_lock:
            counter = self._counter
            self._counter += 1
        pool = context_ids[: self.pool]
        n = min(self.picks, len(pool))
        weights = np.array([1.0 / rank for rank in range(1, len(pool) + 1)])
        weights /= weights.sum()
        rng = _seeded_rng("choose", self.seed, hashlib.sha256(prompt.encode()).hexdigest(), counter)
        picked = rng.choice(len(pool), size=n, replace=False, p=weights)
        return [pool[i] for i in picked]


def make_provider(
    name: str,
    config: ProviderConfig | None = None,
    seed: int = 0,
    dimension: int = DEFAULT_DIMENSION,
) -> Provider:
    """Build a provider from a CLI-style name: mock, mock-stochastic, or live."""
    if name == "mock":
        return MockProvider(seed=seed, dimension=dimension)
    if name == "mock-stochastic":
        return StochasticMockProvider(seed=seed, dimension=dimension)
    if name in ("live", "openai"):
        return OpenAIProvider(config or ProviderConfig())
    raise ValueError(f"unknown provider {name!r} (expected mock, mock-stochastic, or live)")
