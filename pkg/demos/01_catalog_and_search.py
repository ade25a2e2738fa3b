"""Catalog handling and brute-force cosine search, end to end.

Loads the bundled sample catalog, embeds it with the offline mock provider,
round-trips it through JSONL, and runs filtered top-k searches.

Run: python demos/01_catalog_and_search.py
"""

from importlib import resources
from pathlib import Path

from compass import (
    LevelFilter,
    MockProvider,
    build_index,
    embed_catalog,
    filter_by_level,
    load_catalog,
    save_catalog,
    top_k,
)

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)

# 1. Load the shipped sample catalog (67 courses, no embeddings yet).
sample = resources.files("compass").joinpath("data/sample_courses.jsonl")
catalog = load_catalog(str(sample))
print(f"loaded {len(catalog)} courses across {len(catalog.subjects)} subjects")
print(f"embedded yet? {catalog.fully_embedded()}")

# 2. Embed every course description. The mock provider is deterministic:
#    the same text always produces the same unit vector, so this demo is
#    reproducible offline. Swap in OpenAIProvider for real embeddings.
provider = MockProvider(seed=0, dimension=256)
catalog = embed_catalog(catalog, provider, batch_size=8)
print(f"embedded at dimension {catalog.dimension}")

# 3. Save and reload: the JSONL round-trip is exact.
path = out_dir / "sample_embedded.jsonl"
save_catalog(catalog, path)
reloaded = load_catalog(path)
assert [c.course_id for c in reloaded] == [c.course_id for c in catalog]
print(f"saved + reloaded {path} without loss")

# 4. Level filters: the four buckets the service exposes.
for spec in ("all", "100-200", "300-400", "500+"):
    view = filter_by_level(catalog, LevelFilter.parse(spec))
    print(f"  levels {spec:8s} -> {len(view):3d} courses")

# 5. Build the search index (embeddings are unit-normalized once) and run
#    top-k queries. With mock embeddings similarity is structure-free; the
#    point here is the machinery: exact scan, descending scores, stable ties.
index = build_index(catalog)
query_vector = provider.embed("algorithms, complexity, and mathematical rigor")
for level in ("all", "500+"):
    hits = top_k(index, query_vector, k=5, level_filter=LevelFilter.parse(level))
    print(f"top 5 ({level}):")
    for scored in hits:
        print(f"  #{scored.rank} {scored.course_id:12s} sim={scored.similarity:+.4f}")
