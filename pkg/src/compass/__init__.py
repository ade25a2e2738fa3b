"""Course recommendation engine: two-stage retrieval, grounded LLM picks, evaluation harness."""

from .catalog import (
    Catalog,
    CourseRecord,
    EmbeddingCache,
    LevelFilter,
    embed_catalog,
    filter_by_level,
    load_catalog,
    save_catalog,
)
from .index import ScoredCourse, SimilarityIndex, build_index, cosine_similarity, top_k
from .provider import (
    ChatMessage,
    ChatRequest,
    MockProvider,
    OpenAIProvider,
    Provider,
    ProviderConfig,
    StochasticMockProvider,
    make_provider,
)
from .recommender import (
    ContextBundle,
    IdealDescription,
    PromptTemplates,
    Recommendation,
    RecommendationResponse,
    Recommender,
    StudentQuery,
    parse_recommendations,
)

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "CourseRecord",
    "EmbeddingCache",
    "LevelFilter",
    "embed_catalog",
    "filter_by_level",
    "load_catalog",
    "save_catalog",
    "ScoredCourse",
    "SimilarityIndex",
    "build_index",
    "cosine_similarity",
    "top_k",
    "ChatMessage",
    "ChatRequest",
    "MockProvider",
    "OpenAIProvider",
    "Provider",
    "ProviderConfig",
    "StochasticMockProvider",
    "make_provider",
    "ContextBundle",
    "IdealDescription",
    "PromptTemplates",
    "Recommendation",
    "RecommendationResponse",
    "Recommender",
    "StudentQuery",
    "parse_recommendations",
    "__version__",
]
