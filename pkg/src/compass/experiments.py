"""Evaluation harness: subject networks, rank likelihood, bias pairs, latency.

Four studies of the recommender's behavior:

- subject-level embedding networks: how subjects relate in embedding space;
- rank likelihood: how a course's similarity rank in the retrieved context
  relates to its chance of being recommended;
- paired-query bias rates: recommendation-rate deltas between two query
  variants differing only in one descriptor;
- latency: mean retrieval and total durations per level filter.

All trial-level data persists as JSONL plus CSV summaries (plot-ready data,
not images). Trials run sequentially so seeded stochastic mocks reproduce
bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import Catalog, LevelFilter
from .errors import UnknownSubjectError, ZeroMeanError
from .recommender import Recommender, RecommendationResponse, StudentQuery

logger = logging.getLogger(__name__)

_ZERO_MEAN_NORM = 1e-12


def subject_embedding(catalog: Catalog, subject: str) -> np.ndarray:
    """L2-normalized mean of all course embeddings within one subject."""
    vectors = [c.embedding for c in catalog if c.subject == subject and c.embedding is not None]
    if not vectors:
        raise UnknownSubjectError(subject)
    mean = np.mean(np.stack(vectors), axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < _ZERO_MEAN_NORM:
        raise ZeroMeanError(subject)
    return mean / norm


@dataclass(frozen=True)
class SubjectNetwork:
    """Pairwise cosine similarities between subject embeddings.

    Each unordered pair is stored once; self edges are not emitted.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]

    def similarity(self, a: str, b: str) -> float:
        for x, y, s in self.edges:
            if {x, y} == {a, b}:
                return s
        raise KeyError(f"no edge between {a!r} and {b!r}")

    def to_json_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [{"a": a, "b": b, "similarity": s} for a, b, s in self.edges],
        }

    def to_dot(self) -> str:
        lines = ["graph subjects {"]
        for node in self.nodes:
            lines.append(f'  "{node}";')
        for a, b, s in self.edges:
            lines.append(f'  "{a}" -- "{b}" [label="{s:.3f}", weight={s:.6f}];')
        lines.append("}")
        return "\n".join(lines)


def subject_similarity_matrix(catalog: Catalog, subjects: list[str]) -> np.ndarray:
    """Full symmetric cosine matrix over the given subjects (unit diagonal)."""
    vectors = np.stack([subject_embedding(catalog, s) for s in subjects])
    matrix = vectors @ vectors.T
    return np.clip(matrix, -1.0, 1.0)


def subject_network(catalog: Catalog, subjects: list[str]) -> SubjectNetwork:
    """All unordered-pair similarities between the subjects' embeddings."""
    if len(subjects) < 2:
        raise ValueError("subject_network needs at least 2 subjects")
    if len(set(subjects)) != len(subjects):
        raise ValueError("duplicate subjects")
    matrix = subject_similarity_matrix(catalog, subjects)
    edges = []
    for i, a in enumerate(subjects):
        for j in range(i + 1, len(subjects)):
            edges.append((a, subjects[j], float(matrix[i, j])))
    return SubjectNetwork(nodes=tuple(subjects), edges=tuple(edges))


@dataclass(frozen=True)
class TrialRecord:
    """One recommendation trial: which courses came back and at which context ranks."""

    query_id: str
    trial_index: int
    recommended: tuple[tuple[str, int], ...]

    def to_json_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "trial_index": self.trial_index,
            "recommended": [{"course_id": c, "context_rank": r} for c, r in self.recommended],
        }


def _trial_record(query_id: str, trial_index: int, response: RecommendationResponse) -> TrialRecord:
    rank_of = {s.course_id: s.rank for s in response.context.courses}
    recommended = tuple((r.course_id, rank_of[r.course_id]) for r in response.recommendations)
    return TrialRecord(query_id=query_id, trial_index=trial_index, recommended=recommended)


@dataclass(frozen=True)
class RankLikelihood:
    """Aggregated rank-vs-recommendation statistics.

    ``per_rank`` pools all (query, trial) pairs: the fraction of trials whose
    recommendation set includes the course at that context rank.
    ``per_rank_query_mean`` instead averages the per-query likelihoods, since
    the pooling choice is a free parameter; both are emitted and labeled.
    ``cumulative_share`` counts recommendation instances (per appearance) at
    or above each rank, reaching 1.0 at rank k.
    """

    k: int
    per_rank: dict[int, float]
    per_rank_query_mean: dict[int, float]
    cumulative_share: dict[int, float]
    per_query_rank_counts: dict[str, dict[int, int]]
    trials_total: int
    failures: int

    def summary_rows(self) -> list[tuple[int, float, float, float]]:
        return [
            (r, self.per_rank[r], self.per_rank_query_mean[r], self.cumulative_share[r])
            for r in range(1, self.k + 1)
        ]


def rank_likelihood(
    queries: list[StudentQuery],
    trials_per_query: int,
    pipeline: Recommender,
    out_dir: str | Path | None = None,
) -> RankLikelihood:
    """Run queries x trials recommendations and join each pick to its context rank.

    Individual trial failures are logged and excluded; their count is
    reported on the result.
    """
    if trials_per_query < 1:
        raise ValueError("trials_per_query must be >= 1")
    records: list[TrialRecord] = []
    failures = 0
    for qi, query in enumerate(queries):
        query_id = f"q{qi:02d}"
        for trial in range(trials_per_query):
            try:
                response = pipeline.recommend(query)
            except Exception as exc:  # noqa: BLE001 - experiment keeps going
                failures += 1
                logger.warning("trial failed (%s, trial %d): %s", query_id, trial, exc)
                continue
            records.append(_trial_record(query_id, trial, response))

    result = _aggregate_ranks(records, k=pipeline.k, failures=failures)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "rank_trials.jsonl", (r.to_json_dict() for r in records))
        write_csv(
            out / "rank_likelihood.csv",
            ("rank", "likelihood_pooled", "likelihood_query_mean", "cumulative_share"),
            result.summary_rows(),
        )
        counts_rows = [
            (query_id, rank, count)
            for query_id, counts in sorted(result.per_query_rank_counts.items())
            for rank, count in sorted(counts.items())
        ]
        write_csv(out / "rank_counts_per_query.csv", ("query_id", "rank", "count"), counts_rows)
    return result


def _aggregate_ranks(records: list[TrialRecord], k: int, failures: int) -> RankLikelihood:
    total_trials = len(records)
    ranks_hit_per_trial = [set(rank for _, rank in rec.recommended) for rec in records]
    per_rank = {
        r: (sum(1 for hit in ranks_hit_per_trial if r in hit) / total_trials if total_trials else 0.0)
        for r in range(1, k + 1)
    }

    by_query: dict[str, list[set[int]]] = {}
    counts: dict[str, dict[int, int]] = {}
    for rec in records:
        by_query.setdefault(rec.query_id, []).append({rank for _, rank in rec.recommended})
        qcounts = counts.setdefault(rec.query_id, {})
        for _, rank in rec.recommended:
            qcounts[rank] = qcounts.get(rank, 0) + 1

    per_rank_query_mean = {}
    for r in range(1, k + 1):
        if by_query:
            per_query = [sum(1 for hit in hits if r in hit) / len(hits) for hits in by_query.values()]
            per_rank_query_mean[r] = statistics.fmean(per_query)
        else:
            per_rank_query_mean[r] = 0.0

    all_ranks = [rank for rec in records for _, rank in rec.recommended]
    n_recommendations = len(all_ranks)
    cumulative = {}
    running = 0
    rank_hist: dict[int, int] = {}
    for rank in all_ranks:
        rank_hist[rank] = rank_hist.get(rank, 0) + 1
    for r in range(1, k + 1):
        running += rank_hist.get(r, 0)
        cumulative[r] = running / n_recommendations if n_recommendations else 0.0

    return RankLikelihood(
        k=k,
        per_rank=per_rank,
        per_rank_query_mean=per_rank_query_mean,
        cumulative_share=cumulative,
        per_query_rank_counts=counts,
        trials_total=total_trials,
        failures=failures,
    )


@dataclass(frozen=True)
class BiasReport:
    """Recommendation rates for the union of both variants' top-10 courses.

    Rates are appearances/successful-trials per variant, in [0, 1].
    """

    attribute: str
    variant_a: str
    variant_b: str
    rates: dict[str, tuple[float, float]]
    trials_per_variant: int
    failures: tuple[int, int] = (0, 0)

    def max_delta(self) -> float:
        return max((abs(a - b) for a, b in self.rates.values()), default=0.0)

    def to_json_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "variant_a": self.variant_a,
            "variant_b": self.variant_b,
            "trials_per_variant": self.trials_per_variant,
            "failures": list(self.failures),
            "rates": {
                cid: {"rate_a": a, "rate_b": b} for cid, (a, b) in sorted(self.rates.items())
            },
        }


def bias_pairs(
    template: str,
    variant_a: str,
    variant_b: str,
    trials: int,
    pipeline: Recommender,
    attribute: str = "",
    level_filter: LevelFilter | None = None,
    out_dir: str | Path | None = None,
) -> BiasReport:
    """Run paired queries differing only in one descriptor and compare rates.

    ``template`` must contain exactly one "{}" placeholder. The report covers
    the union of each variant's ten most-recommended courses (rate ties break
    alphabetically), so a course prominent for only one variant stays visible.
    """
    if template.count("{}") != 1:
        raise ValueError('template must contain exactly one "{}" placeholder')
    if trials < 1:
        raise ValueError("trials must be >= 1")
    level_filter = level_filter or LevelFilter.all_levels()

    def run_variant(variant: str) -> tuple[dict[str, int], int, int, list[TrialRecord]]:
        query = StudentQuery(text=template.format(variant), level_filter=level_filter)
        appearances: dict[str, int] = {}
        succeeded = 0
        failed = 0
        records = []
        for trial in range(trials):
            try:
                response = pipeline.recommend(query)
            except Exception as exc:  # noqa: BLE001
                failed += 1
                logger.warning("bias trial failed (%s, trial %d): %s", variant, trial, exc)
                continue
            succeeded += 1
            records.append(_trial_record(variant, trial, response))
            for rec in response.recommendations:
                appearances[rec.course_id] = appearances.get(rec.course_id, 0) + 1
        return appearances, succeeded, failed, records

    counts_a, ok_a, fail_a, records_a = run_variant(variant_a)
    counts_b, ok_b, fail_b, records_b = run_variant(variant_b)

    def top10(counts: dict[str, int], n_ok: int) -> list[str]:
        rated = sorted(counts.items(), key=lambda kv: (-kv[1] / n_ok, kv[0])) if n_ok else []
        return [cid for cid, _ in rated[:10]]

    union = sorted(set(top10(counts_a, ok_a)) | set(top10(counts_b, ok_b)))
    rates = {
        cid: (
            counts_a.get(cid, 0) / ok_a if ok_a else 0.0,
            counts_b.get(cid, 0) / ok_b if ok_b else 0.0,
        )
        for cid in union
    }
    report = BiasReport(
        attribute=attribute,
        variant_a=variant_a,
        variant_b=variant_b,
        rates=rates,
        trials_per_variant=trials,
        failures=(fail_a, fail_b),
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "bias_trials.jsonl", (r.to_json_dict() for r in records_a + records_b))
        write_csv(
            out / "bias_rates.csv",
            ("course_id", f"rate_{variant_a}", f"rate_{variant_b}", "delta"),
            [(cid, a, b, abs(a - b)) for cid, (a, b) in sorted(rates.items())],
        )
        (out / "bias_report.json").write_text(json.dumps(report.to_json_dict(), indent=2))
    return report


@dataclass(frozen=True)
class LatencyRow:
    """Mean durations for one level filter; retrieval is always <= total."""

    level_filter: LevelFilter
    mean_total_s: float
    mean_retrieval_s: float
    trials: int

    def __post_init__(self) -> None:
        if self.mean_retrieval_s > self.mean_total_s:
            raise ValueError("mean retrieval time cannot exceed mean total time")


DEFAULT_BENCH_QUERY = "I am interested in data analysis. What courses should I take?"


def latency_bench(
    levels: list[LevelFilter],
    trials: int,
    pipeline: Recommender,
    query_text: str = DEFAULT_BENCH_QUERY,
    out_dir: str | Path | None = None,
) -> list[LatencyRow]:
    """Mean total and retrieval durations per level filter over ``trials`` runs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for level in levels:
        query = StudentQuery(text=query_text, level_filter=level)
        totals, retrievals = [], []
        for trial in range(trials):
            try:
                response = pipeline.recommend(query)
            except Exception as exc:  # noqa: BLE001
                logger.warning("latency trial failed (%s, trial %d): %s", level, trial, exc)
                continue
            totals.append(response.timing.total_s)
            retrievals.append(response.timing.retrieval_s)
        if not totals:
            logger.warning("all latency trials failed for filter %s; row skipped", level)
            continue
        rows.append(
            LatencyRow(
                level_filter=level,
                mean_total_s=statistics.fmean(totals),
                mean_retrieval_s=statistics.fmean(retrievals),
                trials=len(totals),
            )
        )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(
            out / "latency.csv",
            ("level", "total_s", "retrieval_s", "trials"),
            [(str(r.level_filter), r.mean_total_s, r.mean_retrieval_s, r.trials) for r in rows],
        )
    return rows


def write_jsonl(path: Path, rows) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
