"""qam command line: ingest, index, search, eval, report."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from internal.config import Config, load_config, resolve_workspace
from internal.domain.catalog.product import Catalog
from internal.domain.errors import ConfigurationError, QamError
from internal.domain.evaluation.judgment import EvalQuery
from internal.domain.search.result import StrategyId
from internal.evaluation.harness import evaluate
from internal.evaluation.judge import JudgeInterface
from internal.evaluation.report import per_query_table, plot_report, render_table
from internal.evaluation.synthetic import generate_synthetic_corpus
from internal.infra.workspace import Workspace
from internal.modeling.bm25 import InvertedIndex
from internal.modeling.decomposer import make_decomposer
from internal.modeling.embedding import EmbeddingProvider
from internal.modeling.interaction_scorer import InteractionScorer
from internal.modeling.tokenizer import Tokenizer
from internal.provider.catalog import CatalogFormat, CatalogProvider
from internal.retrieval.filtering import FilterPolicy, MissingFieldBehavior
from internal.retrieval.pipeline import EngineSettings, SearchEngine
from internal.retrieval.semantic import Pooling, VectorIndex

logger = logging.getLogger("qam")

STRATEGIES = [s.value for s in StrategyId]


def make_tokenizer(config: Config) -> Tokenizer:
    return Tokenizer(
        lowercase=config.lowercase, pattern=config.token_pattern, stem=config.stem
    )


def make_embedder(config: Config) -> EmbeddingProvider:
    return EmbeddingProvider.make(
        config.embedding_provider,
        dimension=config.embedding_dimension,
        seed=config.embedding_seed,
        tokenizer=make_tokenizer(config),
        url=config.embedding_url,
        api_key=config.service_api_key,
        timeout=config.request_timeout,
    )


def make_policy(config: Config) -> FilterPolicy:
    return FilterPolicy(
        numeric_slack=config.numeric_slack,
        around_slack=config.around_slack,
        age_slack=config.age_slack,
        missing_field_behavior=MissingFieldBehavior(config.missing_field_behavior),
    )


def make_settings(config: Config, rescue_unfiltered: bool = False) -> EngineSettings:
    return EngineSettings(
        result_size=config.result_size,
        rerank_shortlist=config.rerank_shortlist,
        hybrid_depth=config.hybrid_depth,
        qam_shortlist=config.qam_shortlist,
        k_rrf=config.rrf_k,
        rescue_unfiltered=rescue_unfiltered or config.rescue_unfiltered,
    )


def build_indexes(
    config: Config, catalog: Catalog, embedder: EmbeddingProvider
) -> Tuple[InvertedIndex, VectorIndex]:
    lexical = InvertedIndex.make(
        catalog,
        config.indexed_fields,
        make_tokenizer(config),
        k1=config.bm25_k1,
        b=config.bm25_b,
    )
    vector = VectorIndex.make(
        catalog,
        embedder,
        config.embedding_fields,
        Pooling(config.embedding_pooling),
    )
    return lexical, vector


def make_engine(
    config: Config,
    catalog: Catalog,
    lexical: InvertedIndex,
    vector: VectorIndex,
    embedder: EmbeddingProvider,
    rescue_unfiltered: bool = False,
) -> SearchEngine:
    tokenizer = make_tokenizer(config)
    return SearchEngine(
        catalog=catalog,
        lexical_index=lexical,
        vector_index=vector,
        embedder=embedder,
        decomposer=make_decomposer(
            config.decomposer,
            catalog,
            top_rated_threshold=config.top_rated_threshold,
            tokenizer=tokenizer,
            url=config.decomposer_url,
            api_key=config.service_api_key,
            timeout=config.request_timeout,
        ),
        scorer=InteractionScorer.make(
            config.scorer,
            tokenizer=tokenizer,
            overlap_weight=config.overlap_weight,
            title_weight=config.title_weight,
            url=config.scorer_url,
            api_key=config.service_api_key,
            timeout=config.request_timeout,
        ),
        policy=make_policy(config),
        settings=make_settings(config, rescue_unfiltered),
    )


def load_engine(
    config: Config, workspace: Workspace, rescue_unfiltered: bool = False
) -> SearchEngine:
    catalog = workspace.load_catalog()
    lexical, vector = workspace.load_indexes(catalog)
    return make_engine(
        config, catalog, lexical, vector, make_embedder(config), rescue_unfiltered
    )


def cmd_ingest(args: argparse.Namespace, config: Config, workspace: Workspace) -> int:
    path = args.path or config.catalog_path
    if path is None:
        raise ConfigurationError("No catalog path given (argument or catalog_path)")
    catalog_format = CatalogFormat(args.format or config.catalog_format)
    mapping = args.mapping or config.csv_mapping_path
    catalog, report = CatalogProvider(Path(path), catalog_format, mapping).get()
    with workspace.lock():
        workspace.save_catalog(catalog)
    print(
        f"Ingested {report.accepted} products from {path} "
        f"({report.records_read} records read, {report.warning_count} warnings)"
    )
    for warning in report.warnings:
        print(f"  warning: {warning}")
    print(f"Catalog version {catalog.version}")
    return 0


def cmd_index(args: argparse.Namespace, config: Config, workspace: Workspace) -> int:
    with workspace.lock():
        catalog = workspace.load_catalog()
        embedder = make_embedder(config)
        lexical, vector = build_indexes(config, catalog, embedder)
        paths = workspace.save_indexes(lexical, vector)
    for path in paths:
        print(f"Wrote {path}")
    print(f"Indexed {len(catalog)} products (catalog version {catalog.version})")
    return 0


def cmd_search(args: argparse.Namespace, config: Config, workspace: Workspace) -> int:
    engine = load_engine(config, workspace, rescue_unfiltered=args.fallback)
    strategy = StrategyId(args.strategy)

    if args.product:
        checks = engine.explain_product(args.query, args.product)
        if not checks:
            print("No constraints extracted from the query.")
        for constraint, passed in checks:
            print(f"{'PASS' if passed else 'FAIL'}  {constraint}")
        return 0

    outcome = engine.search(strategy, args.query, args.n)
    if not outcome.results:
        print("No results.")
    for r in outcome.results:
        title = engine.catalog.get(r.product_id).title
        print(f"{r.rank:>3}  {r.product_id}  {r.score:.4f}  {title}")
    if args.explain:
        trace = outcome.trace.to_record()
        if strategy is StrategyId.Qam:
            trace["explain"] = engine.explain(args.query).to_record()
        print(json.dumps(trace, indent=2, sort_keys=True))
    return 0


def _synthetic_setup(config: Config, workspace: Workspace) -> List[EvalQuery]:
    corpus = generate_synthetic_corpus(
        config.seed,
        config.synthetic_products,
        config.synthetic_queries,
        min_relevant=config.synthetic_min_relevant,
        policy=make_policy(config),
    )
    if workspace.path(Workspace.CATALOG).exists():
        logger.warning(
            "Replacing the catalog and indexes in %s with a synthetic corpus",
            workspace.root,
        )
    with workspace.lock():
        workspace.save_catalog(corpus.catalog)
        lexical, vector = build_indexes(config, corpus.catalog, make_embedder(config))
        workspace.save_indexes(lexical, vector)
    workspace.save_queries(corpus.queries)
    return corpus.queries


def cmd_eval(args: argparse.Namespace, config: Config, workspace: Workspace) -> int:
    if args.synthetic:
        queries = _synthetic_setup(config, workspace)
    elif args.queries:
        queries = workspace.load_queries(args.queries)
    else:
        raise ConfigurationError("eval needs --synthetic or a query file")

    engine = load_engine(config, workspace)
    strategies = [StrategyId(s) for s in (args.strategies or STRATEGIES)]
    judge = JudgeInterface.make(
        config.judge,
        policy=engine.policy,
        min_overlap=config.judge_min_overlap,
        tokenizer=make_tokenizer(config),
        url=config.judge_url,
        api_key=config.service_api_key,
        timeout=config.request_timeout,
    )
    result = evaluate(
        engine, strategies, queries, judge, config.k_set, progress=not args.quiet
    )

    for strategy, records in result.runs.items():
        workspace.save_runs(strategy.value, records)
    workspace.save_judgments(result.judgments)
    workspace.save_report(result.report)
    table = render_table(result.report)
    workspace.save_text(Workspace.REPORT_TABLE, table)
    workspace.save_text(
        Workspace.REPORT_PER_QUERY, per_query_table(result.report).to_csv(index=False)
    )
    print(table)
    return 0


def cmd_report(args: argparse.Namespace, config: Config, workspace: Workspace) -> int:
    report = workspace.load_report()
    print(render_table(report))
    figure = args.output or workspace.path(Workspace.REPORT_FIGURE)
    plot_report(report, figure)
    print(f"Figure written to {figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qam", description="Hybrid product search with query attribute modeling"
    )
    parser.add_argument("--workspace", type=Path, help="artifact directory")
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="load and validate a catalog file")
    ingest.add_argument("path", nargs="?", type=Path)
    ingest.add_argument("--format", choices=[f.value for f in CatalogFormat])
    ingest.add_argument("--mapping", type=Path, help="CSV key=column mapping file")
    ingest.set_defaults(handler=cmd_ingest)

    index = sub.add_parser("index", help="build the lexical and vector indexes")
    index.set_defaults(handler=cmd_index)

    search = sub.add_parser("search", help="run one query")
    search.add_argument("strategy", choices=STRATEGIES)
    search.add_argument("query")
    search.add_argument("-n", type=int, default=None, help="number of results")
    search.add_argument("--explain", action="store_true", help="print the trace")
    search.add_argument("--product", help="check one product against the constraints")
    search.add_argument(
        "--fallback", action="store_true", help="search unfiltered on an empty filter"
    )
    search.set_defaults(handler=cmd_search)

    ev = sub.add_parser("eval", help="evaluate strategies on a query set")
    ev.add_argument("--synthetic", action="store_true", help="generate a corpus")
    ev.add_argument("--queries", type=Path, help="query file (.jsonl or text)")
    ev.add_argument("--strategies", nargs="+", choices=STRATEGIES)
    ev.add_argument("--quiet", action="store_true", help="no progress bar")
    ev.set_defaults(handler=cmd_eval)

    report = sub.add_parser("report", help="render the stored metric report")
    report.add_argument("--output", type=Path, help="figure path")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "search" and args.n is not None and args.n < 1:
        logger.error("-n must be >= 1")
        return 1
    try:
        config = load_config(args.config, args.seed)
        workspace = Workspace(resolve_workspace(args.workspace))
        return args.handler(args, config, workspace)
    except QamError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
