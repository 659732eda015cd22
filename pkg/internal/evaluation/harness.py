import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from tqdm import tqdm

from internal.domain.errors import EmptyInputError
from internal.domain.evaluation.judgment import (
    EvalQuery,
    Judgment,
    MetricReport,
    RunRecord,
    StrategyMetrics,
)
from internal.domain.search.result import StrategyId
from internal.evaluation.judge import JudgeInterface
from internal.modeling.metrics import ap_at_k, map_at_k, precision_at_k
from internal.retrieval.pipeline import SearchEngine

logger = logging.getLogger(__name__)

DEFAULT_K_SET: Tuple[int, ...] = tuple(range(1, 11))
GROUND_TRUTH = "ground_truth"
POOLED_UNION = "pooled_union"


@dataclass(frozen=True)
class Evaluation:
    report: MetricReport
    runs: Dict[StrategyId, List[RunRecord]]
    judgments: List[Judgment]


def run_strategies(
    engine: SearchEngine,
    strategies: Sequence[StrategyId],
    queries: Sequence[EvalQuery],
    n: int,
    progress: bool = False,
) -> Dict[StrategyId, List[RunRecord]]:
    runs: Dict[StrategyId, List[RunRecord]] = {s: [] for s in strategies}
    for q in tqdm(queries, desc="queries", unit="q", disable=not progress):
        for strategy in strategies:
            outcome = engine.search(strategy, q.text, n)
            runs[strategy].append(
                RunRecord(q.query_id, strategy, tuple(outcome.results), outcome.trace)
            )
    return runs


def judge_runs(
    engine: SearchEngine,
    judge: JudgeInterface,
    queries: Sequence[EvalQuery],
    runs: Mapping[StrategyId, Sequence[RunRecord]],
) -> List[Judgment]:
    """One judgment per (query, product) over the union of all strategies' results."""
    pooled: Dict[str, Set[str]] = {q.query_id: set() for q in queries}
    for records in runs.values():
        for record in records:
            pooled[record.query_id].update(record.product_ids)

    judgments: List[Judgment] = []
    for q in queries:
        d = q.intended or engine.decomposer.decompose(q.text)
        ids = sorted(pooled[q.query_id])
        products = [engine.catalog.get(pid) for pid in ids]
        labels = judge.judge_many(q.text, d, products)
        judgments.extend(
            Judgment(q.query_id, pid, bool(rel), judge.judge_id)
            for pid, rel in zip(ids, labels)
        )
    return judgments


def total_relevant_counts(
    queries: Sequence[EvalQuery], judgments: Sequence[Judgment]
) -> Tuple[Dict[str, int], str]:
    """Ground-truth sizes when every query has them, else the pooled-union count."""
    if all(q.relevant_ids is not None for q in queries):
        return {q.query_id: len(q.relevant_ids) for q in queries}, GROUND_TRUTH
    counts = {q.query_id: 0 for q in queries}
    for j in judgments:
        if j.relevant:
            counts[j.query_id] += 1
    return counts, POOLED_UNION


def score_runs(
    runs: Mapping[StrategyId, Sequence[RunRecord]],
    judgments: Sequence[Judgment],
    total_relevant: Mapping[str, int],
    k_set: Sequence[int] = DEFAULT_K_SET,
    relevance_source: str = GROUND_TRUTH,
) -> MetricReport:
    """Metrics from stored runs and judgments alone.

    Results missing from a short list count as non-relevant for every strategy.
    At level k only queries with at least k relevant items are aggregated.
    """
    if not total_relevant:
        raise EmptyInputError("no queries to score")
    ks = tuple(sorted(set(k_set)))
    if not ks or ks[0] < 1:
        raise ValueError(f"k_set must hold integers >= 1, got {list(k_set)}")
    relevant = {(j.query_id, j.product_id) for j in judgments if j.relevant}
    eligible = {
        k: sorted(qid for qid, total in total_relevant.items() if total >= k)
        for k in ks
    }

    strategies: List[StrategyMetrics] = []
    for strategy, records in runs.items():
        by_query = {r.query_id: r for r in records}
        precision: Dict[int, Optional[float]] = {}
        mean_ap: Dict[int, Optional[float]] = {}
        per_query_ap: Dict[str, Dict[int, float]] = {}
        for k in ks:
            p_values: List[float] = []
            ap_values: List[float] = []
            for qid in eligible[k]:
                record = by_query.get(qid)
                ids = record.product_ids if record is not None else []
                labels = [(qid, pid) in relevant for pid in ids]
                p_values.append(precision_at_k(labels, k))
                ap = ap_at_k(labels, total_relevant[qid], k)
                ap_values.append(ap)
                per_query_ap.setdefault(qid, {})[k] = ap
            precision[k] = float(sum(p_values) / len(p_values)) if p_values else None
            mean_ap[k] = map_at_k(ap_values) if ap_values else None
        strategies.append(
            StrategyMetrics(
                strategy, precision, mean_ap, dict(sorted(per_query_ap.items()))
            )
        )

    queries_per_k = {k: len(eligible[k]) for k in ks}
    logger.info("Queries per k: %s", queries_per_k)
    notes = (
        "Missing results are padded as non-relevant for every strategy.",
        f"Total relevant per query: {relevance_source.replace('_', ' ')}.",
        "At each k only queries with at least k relevant items are aggregated: "
        + ", ".join(f"k={k}: {n}" for k, n in queries_per_k.items())
        + ".",
    )
    return MetricReport(
        k_set=ks,
        query_count=len(total_relevant),
        queries_per_k=queries_per_k,
        strategies=tuple(strategies),
        relevance_source=relevance_source,
        notes=notes,
    )


def evaluate(
    engine: SearchEngine,
    strategies: Sequence[StrategyId],
    queries: Sequence[EvalQuery],
    judge: JudgeInterface,
    k_set: Sequence[int] = DEFAULT_K_SET,
    progress: bool = False,
) -> Evaluation:
    if not queries:
        raise EmptyInputError("query set is empty")
    if not strategies:
        raise EmptyInputError("no strategies selected")
    if not k_set:
        raise ValueError("k_set is empty")
    n = max(k_set)
    runs = run_strategies(engine, strategies, queries, n, progress)
    judgments = judge_runs(engine, judge, queries, runs)
    totals, source = total_relevant_counts(queries, judgments)
    report = score_runs(runs, judgments, totals, k_set, source)
    return Evaluation(report=report, runs=runs, judgments=judgments)
