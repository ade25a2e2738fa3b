"""The ``compass`` command line: ingest, embed, search, recommend, serve, experiments."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .catalog import Catalog, EmbeddingCache, LevelFilter, embed_catalog, load_catalog, save_catalog
from .experiments import bias_pairs, latency_bench, rank_likelihood, subject_network
from .index import build_index, top_k
from .provider import Provider, ProviderConfig, make_provider
from .recommender import Recommender, StudentQuery
from .service import ServiceConfig, create_app_from_config

logger = logging.getLogger(__name__)

LEVEL_CHOICE = click.Choice(["all", "100-200", "300-400", "500+"])
PROVIDER_CHOICE = click.Choice(["mock", "mock-stochastic", "live"])


def _provider_options(fn):
    fn = click.option("--provider", type=PROVIDER_CHOICE, default="mock", show_default=True, help="Chat/embedding backend.")(fn)
    fn = click.option("--provider-config", type=click.Path(exists=True, dir_okay=False), default=None, help="TOML/JSON ProviderConfig file (live provider).")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True, help="Seed for mock providers.")(fn)
    fn = click.option("--dimension", type=int, default=1536, show_default=True, help="Embedding dimension for mock providers.")(fn)
    return fn


def _build_provider(provider: str, provider_config: str | None, seed: int, dimension: int) -> Provider:
    config = ProviderConfig.from_file(provider_config) if provider_config else None
    return make_provider(provider, config=config, seed=seed, dimension=dimension)


def _load_embedded(catalog_path: str, provider: Provider, cache_path: str | None = None) -> Catalog:
    catalog = load_catalog(catalog_path)
    if catalog.fully_embedded():
        return catalog
    if not provider.provider_id.startswith("mock"):
        raise click.ClickException(
            f"{catalog_path} has unembedded courses; run `compass embed` first (live embedding bills per call)"
        )
    cache = EmbeddingCache(cache_path) if cache_path else None
    return embed_catalog(catalog, provider, cache=cache)


def _confirm_live_run(provider: Provider, chat_calls: int, embed_calls: int, confirmed: bool) -> None:
    if provider.provider_id.startswith("mock"):
        return
    click.echo(f"Live run: about {chat_calls} chat calls and {embed_calls} embedding calls against {provider.provider_id}.", err=True)
    if not confirmed:
        raise click.ClickException("pass --confirm-live to run experiments against a live provider")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    """Course recommender: two-stage retrieval plus grounded LLM picks."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Input catalog file.")
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default=None, help="Input format (defaults from suffix).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Output JSONL catalog.")
def ingest(in_path: str, fmt: str | None, out_path: str) -> None:
    """Validate a CSV/JSONL catalog and write it as normalized JSONL."""
    catalog = load_catalog(in_path, format=fmt)
    save_catalog(catalog, out_path)
    click.echo(f"ingested {len(catalog)} courses -> {out_path}")


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--batch", type=int, default=8, show_default=True, help="Concurrent embedding requests.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False), help="Output path (defaults to the input).")
@click.option("--cache", "cache_path", default=None, type=click.Path(dir_okay=False), help="Embedding cache JSONL (resume + no re-billing).")
@_provider_options
def embed(catalog_path: str, batch: int, out_path: str | None, cache_path: str | None,
          provider: str, provider_config: str | None, seed: int, dimension: int) -> None:
    """Embed every course description (title when empty); resumable via --cache."""
    backend = _build_provider(provider, provider_config, seed, dimension)
    catalog = load_catalog(catalog_path)
    cache = EmbeddingCache(cache_path) if cache_path else None
    embedded = embed_catalog(catalog, backend, batch_size=batch, cache=cache)
    out = out_path or catalog_path
    save_catalog(embedded, out)
    click.echo(f"embedded {len(embedded)} courses (dimension {embedded.dimension}) -> {out}")


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query-embedding", "embedding_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON file holding one embedding as an array of floats.")
@click.option("--k", type=int, default=50, show_default=True)
@click.option("--levels", type=LEVEL_CHOICE, default="all", show_default=True)
def search(catalog_path: str, embedding_path: str, k: int, levels: str) -> None:
    """Brute-force cosine top-k over the catalog; emits one ScoredCourse JSON per line."""
    catalog = load_catalog(catalog_path)
    index = build_index(catalog)
    query = np.asarray(json.loads(Path(embedding_path).read_text()), dtype=np.float64)
    for scored in top_k(index, query, k=k, level_filter=LevelFilter.parse(levels)):
        click.echo(json.dumps({"course_id": scored.course_id, "similarity": scored.similarity, "rank": scored.rank}))


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query", required=True, help="Student interests in natural language.")
@click.option("--levels", type=LEVEL_CHOICE, default="all", show_default=True)
@click.option("--k", type=int, default=50, show_default=True, help="Context window size.")
@click.option("--json", "as_json", is_flag=True, help="Emit the full response as JSON.")
@_provider_options
def recommend(catalog_path: str, query: str, levels: str, k: int, as_json: bool,
              provider: str, provider_config: str | None, seed: int, dimension: int) -> None:
    """Run the full pipeline for one query and print ten recommendations."""
    backend = _build_provider(provider, provider_config, seed, dimension)
    catalog = _load_embedded(catalog_path, backend)
    pipeline = Recommender(build_index(catalog), backend, k=k)
    response = pipeline.recommend(StudentQuery(text=query, level_filter=LevelFilter.parse(levels)))
    if as_json:
        click.echo(json.dumps(response.to_dict(include_raw=True), indent=2))
        return
    click.echo(f"ideal description: {response.context.ideal.text[:160]}...")
    click.echo(f"retrieved {len(response.context.courses)} courses; recommending:")
    for i, rec in enumerate(response.recommendations, start=1):
        click.echo(f"{i:2d}. {rec.course_id}  [{rec.confidence}]  {rec.rationale}")
    t = response.timing
    click.echo(f"retrieval {t.retrieval_s:.3f}s / total {t.total_s:.3f}s")
    for w in response.warnings:
        click.echo(f"warning: {w}", err=True)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Service config file (TOML/JSON).")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--provider", type=PROVIDER_CHOICE, default=None, help="Override configured provider.")
@click.option("--provider-config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Seed for mock providers.")
@click.option("--host", default=None, help="Override bind host.")
@click.option("--port", type=int, default=None, help="Override bind port.")
@click.option("--static", "static_dir", type=click.Path(exists=True, file_okay=False), default=None, help="Serve a built web UI from this directory.")
def serve(config_path: str | None, catalog_path: str | None, provider: str | None, provider_config: str | None,
          seed: int | None, host: str | None, port: int | None, static_dir: str | None) -> None:
    """Run the HTTP service (env overrides: COMPASS_*)."""
    from dataclasses import replace

    import uvicorn

    config = ServiceConfig.from_file(config_path)
    overrides = {
        "catalog_path": catalog_path,
        "provider": provider,
        "provider_config_path": provider_config,
        "seed": seed,
        "static_dir": static_dir,
    }
    config = replace(config, **{key: value for key, value in overrides.items() if value is not None})
    bind_host, _, bind_port = config.bind_address.partition(":")
    app = create_app_from_config(config)
    uvicorn.run(app, host=host or bind_host or "127.0.0.1", port=port or int(bind_port or 8000))


@main.group()
def exp() -> None:
    """Evaluation experiments (subject network, rank likelihood, bias, latency)."""


def _exp_common(fn):
    fn = click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--out-dir", type=click.Path(file_okay=False), default="experiments_out", show_default=True)(fn)
    fn = click.option("--k", type=int, default=50, show_default=True)(fn)
    fn = click.option("--confirm-live", is_flag=True, help="Acknowledge the cost estimate of a live-provider run.")(fn)
    fn = _provider_options(fn)
    return fn


@exp.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--subjects", required=True, help="Comma-separated subject codes.")
@click.option("--out", "out_path", default="network.json", show_default=True, type=click.Path(dir_okay=False))
@click.option("--dot", "dot_path", default=None, type=click.Path(dir_okay=False), help="Also write Graphviz DOT.")
@_provider_options
def network(catalog_path: str, subjects: str, out_path: str, dot_path: str | None,
            provider: str, provider_config: str | None, seed: int, dimension: int) -> None:
    """Subject-level similarity network from aggregated course embeddings."""
    backend = _build_provider(provider, provider_config, seed, dimension)
    catalog = _load_embedded(catalog_path, backend)
    wanted = [s.strip() for s in subjects.split(",") if s.strip()]
    net = subject_network(catalog, wanted)
    Path(out_path).write_text(json.dumps(net.to_json_dict(), indent=2))
    click.echo(f"wrote {len(net.edges)} edges -> {out_path}")
    if dot_path:
        Path(dot_path).write_text(net.to_dot())
        click.echo(f"wrote DOT -> {dot_path}")


def _read_queries(path: str) -> list[StudentQuery]:
    queries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            row = json.loads(line)
            queries.append(StudentQuery(text=row["text"], level_filter=LevelFilter.parse(row.get("levels", "all"))))
        else:
            queries.append(StudentQuery(text=line))
    if not queries:
        raise click.ClickException(f"no queries found in {path}")
    return queries


@exp.command()
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="One query per line (plain text or JSON with text/levels).")
@click.option("--trials", type=int, default=10, show_default=True)
@_exp_common
def ranks(queries_path: str, trials: int, catalog_path: str, out_dir: str, k: int, confirm_live: bool,
          provider: str, provider_config: str | None, seed: int, dimension: int) -> None:
    """Recommendation likelihood as a function of context similarity rank."""
    backend = _build_provider(provider, provider_config, seed, dimension)
    queries = _read_queries(queries_path)
    _confirm_live_run(backend, chat_calls=2 * len(queries) * trials, embed_calls=len(queries) * trials, confirmed=confirm_live)
    catalog = _load_embedded(catalog_path, backend)
    pipeline = Recommender(build_index(catalog), backend, k=k)
    result = rank_likelihood(queries, trials_per_query=trials, pipeline=pipeline, out_dir=out_dir)
    click.echo(f"{result.trials_total} trials ({result.failures} failed) over {len(queries)} queries -> {out_dir}")
    for rank in (1, 2, 3, 10, 12):
        if rank <= result.k:
            click.echo(f"rank {rank:3d}: likelihood {result.per_rank[rank]:.3f}, cumulative share {result.cumulative_share[rank]:.3f}")


@exp.command()
@click.option("--template", required=True, help='Query template with one "{}" placeholder.')
@click.option("--a", "variant_a", required=True)
@click.option("--b", "variant_b", required=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--attribute", default="", help="Label for the report (e.g. birth_sex).")
@_exp_common
def bias(template: str, variant_a: str, variant_b: str, trials: int, attribute: str,
         catalog_path: str, out_dir: str, k: int, confirm_live: bool,
         provider: str, provider_config: str | None, seed: int, dimension: int) -> None:
    """Paired-query bias testing: rate deltas over both variants' top-10 courses."""
    backend = _build_provider(provider, provider_config, seed, dimension)
    _confirm_live_run(backend, chat_calls=4 * trials, embed_calls=2 * trials, confirmed=confirm_live)
    catalog = _load_embedded(catalog_path, backend)
    pipeline = Recommender(build_index(catalog), backend, k=k)
    report = bias_pairs(template, variant_a, variant_b, trials=trials, pipeline=pipeline,
                        attribute=attribute, out_dir=out_dir)
    click.echo(f"rates over {len(report.rates)} courses (union of both top-10s) -> {out_dir}")
    for cid, (ra, rb) in sorted(report.rates.items(), key=lambda kv: -abs(kv[1][0] - kv[1][1])):
        click.echo(f"{cid:14s} {variant_a}={ra:.2f} {variant_b}={rb:.2f} delta={abs(ra - rb):.2f}")


@exp.command()
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--query", "query_text", default=None, help="Benchmark query (defaults to a generic one).")
@_exp_common
def latency(trials: int, query_text: str | None, catalog_path: str, out_dir: str, k: int, confirm_live: bool,
            provider: str, provider_config: str | None, seed: int, dimension: int) -> None:
    """Mean retrieval/total durations for the four standard level filters."""
    backend = _build_provider(provider, provider_config, seed, dimension)
    levels = [LevelFilter.parse(s) for s in ("all", "100-200", "300-400", "500+")]
    _confirm_live_run(backend, chat_calls=2 * trials * len(levels), embed_calls=trials * len(levels), confirmed=confirm_live)
    catalog = _load_embedded(catalog_path, backend)
    pipeline = Recommender(build_index(catalog), backend, k=k)
    kwargs = {"query_text": query_text} if query_text else {}
    rows = latency_bench(levels, trials=trials, pipeline=pipeline, out_dir=out_dir, **kwargs)
    click.echo(f"{'level':10s} {'total_s':>9s} {'retrieval_s':>12s} {'trials':>7s}")
    for row in rows:
        click.echo(f"{str(row.level_filter):10s} {row.mean_total_s:9.3f} {row.mean_retrieval_s:12.3f} {row.trials:7d}")


if __name__ == "__main__":
    main()
