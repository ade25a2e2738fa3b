"""The evaluation harness: subject networks, rank likelihood, bias pairs, latency.

Everything runs offline against mock providers and lands in demo_out/ as
JSONL + CSV (plot-ready data files).

Run: python demos/03_experiments.py
"""

from importlib import resources
from pathlib import Path

from compass import (
    LevelFilter,
    MockProvider,
    Recommender,
    StochasticMockProvider,
    StudentQuery,
    build_index,
    embed_catalog,
    load_catalog,
)
from compass.experiments import bias_pairs, latency_bench, rank_likelihood, subject_network

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)

sample = resources.files("compass").joinpath("data/sample_courses.jsonl")
provider = MockProvider(seed=0, dimension=256)
catalog = embed_catalog(load_catalog(str(sample)), provider)
index = build_index(catalog)

# --- 1. Subject-level similarity network --------------------------------
# Each subject is represented by the normalized mean of its course
# embeddings; edges carry pairwise cosine similarity.
subjects = ["EECS", "MATH", "STATS", "POLSCI", "PHIL", "HISTORY", "ENGLISH", "PHYSICS"]
network = subject_network(catalog, subjects)
(out_dir / "subject_network.json").write_text(__import__("json").dumps(network.to_json_dict(), indent=2))
(out_dir / "subject_network.dot").write_text(network.to_dot())
print(f"subject network: {len(network.edges)} edges -> demo_out/subject_network.{{json,dot}}")
strongest = max(network.edges, key=lambda e: e[2])
print(f"  strongest edge: {strongest[0]} -- {strongest[1]} at {strongest[2]:.3f}")

# --- 2. Rank likelihood ---------------------------------------------------
# How does a course's similarity rank in the retrieved context relate to its
# chance of being recommended? The deterministic mock always picks ranks
# 1-10; the stochastic mock samples 10 of the top 25 weighted by 1/rank,
# which produces a declining profile like a real model's.
queries = [
    StudentQuery(text="I am interested in data analysis."),
    StudentQuery(text="I am interested in political theory."),
    StudentQuery(text="I am interested in machine learning."),
]
stochastic = Recommender(index, StochasticMockProvider(seed=1, dimension=256), k=50)
result = rank_likelihood(queries, trials_per_query=10, pipeline=stochastic, out_dir=out_dir)
print(f"\nrank likelihood over {result.trials_total} trials -> demo_out/rank_likelihood.csv")
for rank in (1, 2, 5, 10, 12, 25):
    print(f"  rank {rank:2d}: likelihood {result.per_rank[rank]:.2f}, cumulative share {result.cumulative_share[rank]:.2f}")

# --- 3. Paired-query bias testing ----------------------------------------
# Same query template, one descriptor swapped. The deterministic pipeline is
# blind to the descriptor (the null case: all deltas are zero); the
# stochastic mock shows prompt sensitivity, like temperature-0 hosted models.
template = "I am a {} interested in machine learning. What courses should I take?"
deterministic = Recommender(index, MockProvider(seed=0, dimension=256), k=50)
null_report = bias_pairs(template, "man", "woman", trials=20, pipeline=deterministic, attribute="birth_sex")
print(f"\nbias null case (deterministic pipeline): max rate delta = {null_report.max_delta():.2f}")

noisy = Recommender(index, StochasticMockProvider(seed=1, dimension=256), k=50)
noisy_report = bias_pairs(template, "man", "woman", trials=20, pipeline=noisy, attribute="birth_sex", out_dir=out_dir)
print(f"bias with stochastic picks: max rate delta = {noisy_report.max_delta():.2f} -> demo_out/bias_rates.csv")
for cid, (ra, rb) in sorted(noisy_report.rates.items(), key=lambda kv: -abs(kv[1][0] - kv[1][1]))[:3]:
    print(f"  {cid:12s} man={ra:.2f} woman={rb:.2f}")

# --- 4. Latency ------------------------------------------------------------
# Mean retrieval (stage 1 + embedding + search) and total durations per
# level filter. With mocks this measures the pure pipeline overhead; against
# hosted models the same table reproduces a wall-clock benchmark.
levels = [LevelFilter.parse(s) for s in ("all", "100-200", "300-400", "500+")]
rows = latency_bench(levels, trials=10, pipeline=deterministic, out_dir=out_dir)
print("\nlatency (mock providers, so these are pipeline-overhead numbers):")
print(f"  {'level':10s} {'total_ms':>9s} {'retrieval_ms':>13s}")
for row in rows:
    print(f"  {str(row.level_filter):10s} {row.mean_total_s * 1000:9.2f} {row.mean_retrieval_s * 1000:13.2f}")
