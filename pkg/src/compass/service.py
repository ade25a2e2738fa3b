"""HTTP service exposing the recommender to the web UI and API clients.

Stateless apart from the immutable index: every request carries everything
needed, responses return the retrieved context (ranks + similarities) so
clients can explain results, and all shared state is read-only after
startup. Concurrency is bounded by a counting semaphore; requests beyond
the cap get 503 immediately rather than queueing.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeoutError
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .catalog import Catalog, LevelFilter, embed_catalog, load_catalog
from .errors import EmptyCorpusError, ParseFailureError, ProviderError
from .index import build_index
from .provider import Provider, ProviderConfig, make_provider
from .recommender import Recommender, StudentQuery

logger = logging.getLogger(__name__)
request_logger = logging.getLogger("compass.service.requests")

LEVEL_CHOICES = ("all", "100-200", "300-400", "500+")


@dataclass(frozen=True)
class ServiceConfig:
    """Service settings; file values can be overridden by COMPASS_* env vars."""

    bind_address: str = "127.0.0.1:8000"
    catalog_path: str = ""
    provider: str = "mock"
    provider_config_path: str = ""
    seed: int = 0
    k: int = 50
    request_timeout: float = 120.0
    max_concurrent_recommendations: int = 4
    cors_origins: tuple[str, ...] = ()
    static_dir: str = ""

    def __post_init__(self) -> None:
        if self.max_concurrent_recommendations < 1:
            raise ValueError("max_concurrent_recommendations must be >= 1")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")

    @classmethod
    def from_file(cls, path: str | Path | None = None, env: dict[str, str] | None = None) -> "ServiceConfig":
        data: dict = {}
        if path is not None:
            text = Path(path).read_text(encoding="utf-8")
            if str(path).endswith(".toml"):
                try:
                    import tomllib
                except ImportError:
                    import tomli as tomllib
                data = tomllib.loads(text)
            else:
                data = json.loads(text)
        env = os.environ if env is None else env
        overrides = {
            "bind_address": env.get("COMPASS_BIND_ADDRESS"),
            "catalog_path": env.get("COMPASS_CATALOG_PATH"),
            "provider": env.get("COMPASS_PROVIDER"),
            "provider_config_path": env.get("COMPASS_PROVIDER_CONFIG"),
            "seed": env.get("COMPASS_SEED"),
            "k": env.get("COMPASS_K"),
            "request_timeout": env.get("COMPASS_REQUEST_TIMEOUT"),
            "max_concurrent_recommendations": env.get("COMPASS_MAX_CONCURRENT"),
            "cors_origins": env.get("COMPASS_CORS_ORIGINS"),
            "static_dir": env.get("COMPASS_STATIC_DIR"),
        }
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("seed", "k", "max_concurrent_recommendations"):
                data[key] = int(value)
            elif key == "request_timeout":
                data[key] = float(value)
            elif key == "cors_origins":
                data[key] = tuple(o.strip() for o in value.split(",") if o.strip())
            else:
                data[key] = value
        if isinstance(data.get("cors_origins"), list):
            data["cors_origins"] = tuple(data["cors_origins"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown service config keys: {sorted(unknown)}")
        return cls(**data)


class RecommendBody(BaseModel):
    query: str = Field(min_length=1, max_length=4000)
    levels: Literal["all", "100-200", "300-400", "500+"] = "all"
    k: int | None = Field(default=None, ge=1, le=500)


def create_app(
    catalog: Catalog,
    provider: Provider,
    k: int = 50,
    request_timeout: float = 120.0,
    max_concurrent_recommendations: int = 4,
    cors_origins: tuple[str, ...] = (),
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the FastAPI app around an embedded catalog and a provider."""
    index = build_index(catalog)
    pipeline = Recommender(index, provider, k=k)
    provider_mode = "mock" if provider.provider_id.startswith("mock") else "live"

    app = FastAPI(title="compass", docs_url=None, redoc_url=None)
    app.state.catalog = catalog
    app.state.pipeline = pipeline
    app.state.provider_mode = provider_mode

    gate = threading.BoundedSemaphore(max_concurrent_recommendations)
    executor = ThreadPoolExecutor(max_workers=max_concurrent_recommendations + 2)

    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(RequestValidationError)
    async def invalid_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.middleware("http")
    async def tag_and_log(request: Request, call_next):
        request_id = uuid.uuid4().hex[:16]
        request.state.request_id = request_id
        request.state.levels = None
        started = time.perf_counter()
        response = await call_next(request)
        response.headers["X-Request-ID"] = request_id
        request_logger.info(
            "%s",
            json.dumps(
                {
                    "request_id": request_id,
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "duration_ms": round((time.perf_counter() - started) * 1000.0, 3),
                    "levels": request.state.levels,
                }
            ),
        )
        return response

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "catalog_size": len(catalog),
            "dimension": catalog.dimension,
            "provider_mode": provider_mode,
        }

    @app.get("/api/courses/{course_id}")
    def course_detail(course_id: str):
        course = catalog.get(course_id)
        if course is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown course {course_id!r}"})
        return {
            "course_id": course.course_id,
            "level": course.level,
            "subject": course.subject,
            "title": course.title,
            "description": course.description,
        }

    @app.post("/api/recommend")
    def recommend(body: RecommendBody, request: Request):
        request.state.levels = body.levels
        query = StudentQuery(text=body.query, level_filter=LevelFilter.parse(body.levels))
        if not gate.acquire(blocking=False):
            return JSONResponse(status_code=503, content={"detail": "recommendation capacity exhausted, retry shortly"})
        try:
            future = executor.submit(pipeline.recommend, query, body.k)
            try:
                response = future.result(timeout=request_timeout)
            except FutureTimeoutError:
                future.cancel()
                return JSONResponse(status_code=504, content={"detail": f"recommendation exceeded {request_timeout}s"})
        except EmptyCorpusError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except ParseFailureError as exc:
            return JSONResponse(status_code=502, content={"detail": f"[recommendation-parse] {exc}"})
        except ProviderError as exc:
            return JSONResponse(status_code=502, content={"detail": str(exc), "stage": exc.stage})
        finally:
            gate.release()
        return response.to_dict()

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def create_app_from_config(config: ServiceConfig) -> FastAPI:
    """Load the catalog, build the provider, and assemble the app.

    A catalog without embeddings is embedded at startup when the provider is
    a mock; with a live provider that would bill an API account, so it is
    rejected instead.
    """
    if not config.catalog_path:
        raise ValueError("service config needs catalog_path")
    catalog = load_catalog(config.catalog_path)
    provider_config = None
    if config.provider_config_path:
        provider_config = ProviderConfig.from_file(config.provider_config_path)
    provider = make_provider(config.provider, config=provider_config, seed=config.seed)
    if not catalog.fully_embedded():
        if provider.provider_id.startswith("mock"):
            logger.info("catalog %s has unembedded courses; embedding with %s", config.catalog_path, provider.provider_id)
            catalog = embed_catalog(catalog, provider)
        else:
            raise ValueError("catalog is not fully embedded; run `compass embed` before serving with a live provider")
    return create_app(
        catalog,
        provider,
        k=config.k,
        request_timeout=config.request_timeout,
        max_concurrent_recommendations=config.max_concurrent_recommendations,
        cors_origins=config.cors_origins,
        static_dir=config.static_dir or None,
    )
