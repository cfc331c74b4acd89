"""Command line entry point.

    pmtestgen generate --url URL --count N [--mode deterministic|llm] [--out FILE]
    pmtestgen run --collection FILE [--target URL] [--json]
    pmtestgen probe --url URL
    pmtestgen corpus add --corpus-file FILE --description TEXT --script FILE [--tags a,b]
    pmtestgen corpus list [--corpus-file FILE]
    pmtestgen serve [--port PORT]

Exit status: 0 on success, 1 on a domain error (or failing tests for
``run``), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import sys
from pathlib import Path
from typing import Optional, Sequence

from .collection import CollectionError, parse_collection, serialize_collection
from .corpus import CorpusStore, ExemplarInvalid, ingest_exemplar, load_corpus
from .generator import CatalogExhausted
from .llm import REDACTED, ProviderConfig
from .pipeline import MAX_COUNT, MODES, GenerationJob, run_job
from .probe import ProbeConfig, ProbeError, probe, summarize_capture
from .runner import run_collection
from .service import DEFAULT_PORT, GenerationService, serve


def _count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if not 1 <= value <= MAX_COUNT:
        raise argparse.ArgumentTypeError(f"count must be between 1 and {MAX_COUNT}")
    return value


def _method(text: str) -> str:
    method = text.upper()
    if method not in ("GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"):
        raise argparse.ArgumentTypeError(f"unsupported method {text!r}")
    return method


def _add_provider_flags(p: argparse.ArgumentParser):
    p.add_argument("--base-url", help="chat-completions base URL (env LLM_BASE_URL)")
    p.add_argument("--model", help="model name (env LLM_MODEL)")
    p.add_argument("--api-key", help="bearer token (env LLM_API_KEY)")
    p.add_argument("--corpus-file", help="JSON-lines exemplar file added to the built-in corpus")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmtestgen", description="Generate and run Postman API tests.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="probe an endpoint and generate tests")
    gen.add_argument("--url", required=True)
    gen.add_argument("--count", type=_count, required=True)
    gen.add_argument("--mode", choices=MODES)
    gen.add_argument("--method", type=_method, default="GET")
    gen.add_argument("--out", help="write the Postman collection here")
    gen.add_argument("--name", help="collection name (default: derived from the URL)")
    gen.add_argument("--seed", type=int, help="seed for the collection id")
    gen.add_argument("--timeout-ms", type=int, default=10_000)
    _add_provider_flags(gen)

    run = sub.add_parser("run", help="execute a collection's tests")
    run.add_argument("--collection", required=True)
    run.add_argument("--target", help="send requests here instead of the stored URL")
    run.add_argument("--json", action="store_true", help="print the report as JSON")
    run.add_argument("--timeout-ms", type=int, default=10_000)

    pr = sub.add_parser("probe", help="show what the generator sees for an endpoint")
    pr.add_argument("--url", required=True)
    pr.add_argument("--method", type=_method, default="GET")
    pr.add_argument("--max-chars", type=int, default=2000)

    corpus = sub.add_parser("corpus", help="manage the exemplar corpus")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)
    add = corpus_sub.add_parser("add", help="ingest a script file as an exemplar")
    add.add_argument("--corpus-file", required=True)
    add.add_argument("--description", required=True)
    add.add_argument("--script", required=True, help="script file, or - for stdin")
    add.add_argument("--tags", default="", help="comma-separated tags")
    lst = corpus_sub.add_parser("list", help="list exemplars")
    lst.add_argument("--corpus-file")

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=int(os.environ.get("PORT", DEFAULT_PORT)))
    srv.add_argument("--seed", type=int, help="seed for collection ids")
    _add_provider_flags(srv)
    return parser


def _provider(args) -> Optional[ProviderConfig]:
    return ProviderConfig.from_env(base_url=args.base_url, model=args.model, api_key=args.api_key)


def _scrub(message: str, provider: Optional[ProviderConfig]) -> str:
    key = (provider.api_key if provider else "") or os.environ.get("LLM_API_KEY", "")
    return message.replace(key, REDACTED) if key else message


def _generate(args, parser) -> int:
    provider = _provider(args)
    mode = args.mode or ("llm" if provider else "deterministic")
    if mode == "llm" and provider is None:
        parser.error("--mode llm needs --base-url and --model (or LLM_BASE_URL and LLM_MODEL)")
    job = GenerationJob(args.url, args.count, args.method, mode, provider if mode == "llm" else None)
    rng = random.Random(args.seed) if args.seed is not None else None
    corpus = load_corpus(args.corpus_file) if mode == "llm" else []
    done = run_job(job, corpus=corpus, name=args.name, rng=rng, timeout_ms=args.timeout_ms)
    for line in done.outcome.diagnostics:
        print(f"note: {line}", file=sys.stderr)
    if args.out:
        Path(args.out).write_bytes(serialize_collection(done.outcome.collection))
    print(done.outcome.script_text)
    return 0


def _run(args) -> int:
    collection, warnings = parse_collection(Path(args.collection).read_bytes())
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    config = ProbeConfig(url=args.target or collection.items[0].request_url, timeout_ms=args.timeout_ms)
    report = run_collection(collection, args.target, config)
    print(report.to_json() if args.json else report.to_text())
    return 0 if report.ok else 1


def _probe(args) -> int:
    capture = probe(ProbeConfig(args.url, args.method))
    print(summarize_capture(capture, args.max_chars))
    return 0


def _corpus(args) -> int:
    if args.corpus_command == "add":
        text = sys.stdin.read() if args.script == "-" else Path(args.script).read_text(encoding="utf-8")
        record = ingest_exemplar(args.description, text, args.tags.split(","))
        written = CorpusStore(args.corpus_file).add(record)
        print(record.id if written else f"{record.id} (already present)")
        return 0
    for record in load_corpus(args.corpus_file):
        tags = ",".join(record.tags)
        print(f"{record.id}\t{tags}\t{record.description}")
    return 0


def _serve(args) -> int:
    provider = _provider(args)
    rng = random.Random(args.seed) if args.seed is not None else None
    service = GenerationService(provider=provider, corpus=load_corpus(args.corpus_file), rng=rng)
    print(f"serving on http://{args.host}:{args.port}", file=sys.stderr)
    serve(service, args.host, args.port)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"generate": lambda: _generate(args, parser), "run": lambda: _run(args),
                "probe": lambda: _probe(args), "corpus": lambda: _corpus(args), "serve": lambda: _serve(args)}
    try:
        return handlers[args.command]()
    except (ProbeError, CatalogExhausted, CollectionError, ExemplarInvalid, OSError, ValueError) as exc:
        provider = _provider(args) if hasattr(args, "base_url") else None
        print(f"error: {_scrub(str(exc), provider)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
