"""Command-line interface.

Subcommands: serve, score, evaluate, retrieve, build-prompt, embed-corpus,
toy-train, stats. Exit codes: 0 ok, 1 internal error, 2 bad configuration,
3 unreachable upstream, 4 malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from . import __version__
from .answers import MissingComponentError, RewardMode
from .clients import HttpEmbedderClient, HttpTokenCounter, UpstreamError
from .config import ConfigError, ServiceConfig, load_config
from .embedding import HashEmbedder
from .evaluation import (
    aggregate_runs,
    corpus_stats,
    evaluate_run,
    format_aggregate_table,
    parse_run_file,
    round_half_up,
)
from .grpo import ToyBanditSpec, default_action_space, train_toy_bandit
from .prompting import (
    HeuristicTokenCounter,
    PromptBudgetError,
    PromptSection,
    build_prompt,
)
from .retrieval import CorpusSection, load_corpus, retrieve_topk, save_corpus
from .scoring import GroupRequest
from .service import build_engine, create_app, schema_dump

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_UPSTREAM = 3
EXIT_INPUT = 4


def _read_jsonl(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
    return rows


def _write_jsonl(path: str, rows: list[dict]) -> None:
    if path == "-":
        for row in rows:
            print(json.dumps(row))
        return
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _config_from_args(args: argparse.Namespace, **overrides) -> ServiceConfig:
    return load_config(path=getattr(args, "config", None), overrides=overrides)


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config = _config_from_args(args, mode=args.mode, listen=args.listen)
    host, port = config.listen_host_port()
    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    config = _config_from_args(args, mode=args.mode)
    engine = build_engine(config)
    rows = _read_jsonl(args.infile)
    out_rows: list[dict] = []
    for row_no, row in enumerate(rows, start=1):
        try:
            request = GroupRequest(
                prompt_id=str(row["prompt_id"]),
                completions=list(row["completions"]),
                gold_citations={int(c) for c in row["gold_citations"]},
                context_codes={int(c) for c in row["context_codes"]},
                reference_answer=row.get("reference_answer"),
                question=row.get("question", ""),
                logp_new=row.get("logp_new"),
                logp_old=row.get("logp_old"),
                logp_ref=row.get("logp_ref"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{args.infile}: group {row_no}: {exc}") from exc
        scores = engine.score_group(request)
        for index, breakdown in enumerate(scores.breakdowns):
            out = {"prompt_id": scores.prompt_id, "index": index}
            out.update(breakdown.to_json())
            out["advantage"] = scores.advantages[index]
            out["loss"] = scores.loss
            out_rows.append(out)
    _write_jsonl(args.out, out_rows)
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    order = config.block_order()
    run_metrics = [evaluate_run(parse_run_file(path, order)) for path in args.runs]
    seeds = None
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(","))
    agg = aggregate_runs(run_metrics, seeds=seeds)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(agg.to_json(), fh, indent=2)
            fh.write("\n")
    print(format_aggregate_table(agg))
    return EXIT_OK


def _embedder_from(args: argparse.Namespace, config: ServiceConfig):
    url = getattr(args, "embedder", None) or config.embedder_url
    if url:
        return HttpEmbedderClient(url, max_in_flight=config.max_in_flight)
    return HashEmbedder()


def _cmd_retrieve(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = load_corpus(args.corpus)
    embedder = _embedder_from(args, config)
    query = embedder.embed([args.query])[0]
    ranked = retrieve_topk(query, corpus, k=args.k, w=config.head_weights())
    _write_jsonl(args.out, [r.to_json() for r in ranked])
    return EXIT_OK


def _cmd_build_prompt(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    ranked_rows = _read_jsonl(args.sections)
    try:
        ranked = [PromptSection(int(r["code"]), r["text"]) for r in ranked_rows]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{args.sections}: rows need code and text: {exc}") from exc
    gold = {int(c) for c in args.gold.split(",")} if args.gold else set()
    gold_texts = None
    if args.gold_texts:
        gold_texts = {
            int(r["code"]): r["text"] for r in _read_jsonl(args.gold_texts)
        }
    counter = (
        HttpTokenCounter(config.tokenizer_url, max_in_flight=config.max_in_flight)
        if config.tokenizer_url
        else HeuristicTokenCounter()
    )
    bundle = build_prompt(
        args.question,
        ranked,
        gold,
        budget=args.budget if args.budget is not None else config.budget,
        k=args.k if args.k is not None else config.top_k,
        counter=counter,
        gold_texts=gold_texts,
    )
    payload = asdict(bundle)
    if args.out == "-":
        print(json.dumps(payload, indent=2))
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_embed_corpus(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    rows = _read_jsonl(args.infile)
    embedder = _embedder_from(args, config)
    try:
        codes = [int(r["code"]) for r in rows]
        texts = [r["text"] for r in rows]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{args.infile}: rows need code and text: {exc}") from exc
    bundles = embedder.embed(texts)
    sections = [
        CorpusSection(code=c, text=t, embedding=b)
        for c, t, b in zip(codes, texts, bundles)
    ]
    save_corpus(sections, args.out)
    return EXIT_OK


def _cmd_toy_train(args: argparse.Namespace) -> int:
    gold = frozenset(int(c) for c in args.gold.split(","))
    context = frozenset(int(c) for c in args.context.split(","))
    spec = ToyBanditSpec(
        actions=default_action_space(gold, context),
        gold=gold,
        context=context,
        mode=RewardMode.parse(args.mode),
        learning_rate=args.lr,
        iterations=args.iters,
        seed=args.seed,
    )
    curve = train_toy_bandit(spec)
    _write_jsonl(
        args.out,
        [
            {
                "iteration": p.iteration,
                "expected_reward": p.expected_reward,
                "entropy": p.entropy,
            }
            for p in curve
        ],
    )
    return EXIT_OK


def _cmd_stats(args: argparse.Namespace) -> int:
    rows = _read_jsonl(args.infile)
    try:
        records = [(r["reference_answer"], r["gold_citations"]) for r in rows]
    except (KeyError, TypeError) as exc:
        raise ValueError(
            f"{args.infile}: rows need reference_answer and gold_citations: {exc}"
        ) from exc
    avg_chars, avg_sections = corpus_stats(records)
    print(
        json.dumps(
            {
                "avg_answer_chars": round_half_up(avg_chars),
                "avg_sections_per_answer": round_half_up(avg_sections),
            }
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nitireward",
        description="Citation-gated reward scoring, retrieval fusion and evaluation",
    )
    parser.add_argument("--version", action="version", version=f"nitireward {__version__}")
    parser.add_argument(
        "--schema", action="store_true", help="print wire schemas as JSON and exit"
    )
    sub = parser.add_subparsers(dest="command")

    serve = sub.add_parser("serve", help="run the scoring HTTP service")
    serve.add_argument("--config", default=None)
    serve.add_argument("--mode", default=None)
    serve.add_argument("--listen", default=None, help="host:port")
    serve.set_defaults(func=_cmd_serve)

    score = sub.add_parser("score", help="score rollout groups from a JSONL file")
    score.add_argument("--config", default=None)
    score.add_argument("--mode", default=None)
    score.add_argument("--in", dest="infile", required=True)
    score.add_argument("--out", default="-")
    score.set_defaults(func=_cmd_score)

    evaluate = sub.add_parser("evaluate", help="aggregate metrics over run files")
    evaluate.add_argument("--config", default=None)
    evaluate.add_argument("--runs", nargs="+", required=True)
    evaluate.add_argument("--seeds", default=None, help="comma-separated seed list")
    evaluate.add_argument("--json", default=None, help="also write the report as JSON")
    evaluate.set_defaults(func=_cmd_evaluate)

    retrieve = sub.add_parser("retrieve", help="rank corpus sections for a query")
    retrieve.add_argument("--config", default=None)
    retrieve.add_argument("--corpus", required=True)
    retrieve.add_argument("--query", required=True)
    retrieve.add_argument("-k", type=int, default=10)
    retrieve.add_argument("--embedder", default=None, help="embedding service URL")
    retrieve.add_argument("--out", default="-")
    retrieve.set_defaults(func=_cmd_retrieve)

    build_p = sub.add_parser("build-prompt", help="assemble a budgeted prompt")
    build_p.add_argument("--config", default=None)
    build_p.add_argument("--question", required=True)
    build_p.add_argument("--sections", required=True, help="ranked sections JSONL")
    build_p.add_argument("--gold", default="", help="comma-separated gold codes")
    build_p.add_argument("--gold-texts", default=None, help="JSONL with gold section texts")
    build_p.add_argument("--budget", type=int, default=None)
    build_p.add_argument("-k", type=int, default=None)
    build_p.add_argument("--out", default="-")
    build_p.set_defaults(func=_cmd_build_prompt)

    embed = sub.add_parser("embed-corpus", help="embed sections into a corpus file")
    embed.add_argument("--config", default=None)
    embed.add_argument("--in", dest="infile", required=True)
    embed.add_argument("--out", required=True)
    embed.add_argument("--embedder", default=None, help="embedding service URL")
    embed.set_defaults(func=_cmd_embed_corpus)

    toy = sub.add_parser("toy-train", help="train the toy citation bandit")
    toy.add_argument("--iters", type=int, default=200)
    toy.add_argument("--seed", type=int, default=69420)
    toy.add_argument("--lr", type=float, default=0.1)
    toy.add_argument("--mode", default="semantic")
    toy.add_argument("--gold", default="2,5")
    toy.add_argument("--context", default="1,2,3,4,5")
    toy.add_argument("--out", default="-")
    toy.set_defaults(func=_cmd_toy_train)

    stats = sub.add_parser("stats", help="dataset complexity statistics")
    stats.add_argument("--in", dest="infile", required=True)
    stats.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.schema:
        print(schema_dump())
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingComponentError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UpstreamError as exc:
        print(f"upstream error: {exc}", file=sys.stderr)
        return EXIT_UPSTREAM
    except (FileNotFoundError, PromptBudgetError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
