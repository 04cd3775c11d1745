"""Command-line entry point: ``cogniloc index|localize|evaluate|classify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .code_graph import build_graph, index_filename, read_fixture, save_graph
from .errors import CogniLocError, ConfigError, GranularityMismatch, IoFailure
from .evaluation import classify_report, compare_runs, evaluate_run
from .front import load_bug_reports
from .pipeline import GraphStore, RunConfig, make_backend, run_localization

logger = logging.getLogger("cogniloc")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IO = 2


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_index(fixture: str, out: str) -> int:
    try:
        graph = build_graph(read_fixture(fixture))
        out_path = Path(out)
        if out_path.suffix != ".gz":
            out_path = out_path / index_filename(graph.system, graph.version)
        save_graph(graph, out_path)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CogniLocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"segments={len(graph.segments)} edges={len(graph.edges)}")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_localize(bugs: str, index_dir: str, config: str | None, out: str, audit_dir: str | None = None) -> int:
    try:
        cfg = RunConfig.load(config)
        backend = make_backend(cfg)
        reports = load_bug_reports(bugs)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CogniLocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    outcomes = run_localization(reports, GraphStore(index_dir), backend, cfg)
    _write(out, _dump({"results": [o.result_record() for o in outcomes]}))

    audit = cfg.audit if cfg.audit is not None else cfg.is_scripted
    if audit:
        audit_root = Path(audit_dir) if audit_dir else Path(out).with_suffix(".audit")
        for o in outcomes:
            if o.state is not None:
                _write(audit_root / f"{o.bug_id}.json", _dump(o.state.to_dict()))

    ok = sum(o.ok for o in outcomes)
    for o in outcomes:
        if not o.ok:
            print(f"failed {o.bug_id}: {o.error}", file=sys.stderr)
    print(f"localized {ok}/{len(outcomes)} bugs -> {out}")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_evaluate(
    results: str,
    bugs: str,
    granularity: str = "method",
    k: int = 10,
    compare: str | None = None,
    out: str | None = None,
) -> int:
    try:
        report = evaluate_run(results, bugs, granularity, k)
        payload: dict[str, Any] = {"evaluation": report.to_dict()}
        print(report.format_table())
        if compare:
            cmp = compare_runs(results, compare, bugs, granularity, k)
            payload["comparison"] = cmp
            print(f"\ncomparison vs {compare} ({cmp['pairs']} paired bugs)")
            for point, entry in cmp["points"].items():
                p = "n/a" if entry["p_value"] is None else f"{entry['p_value']:.4f}"
                print(f"{point:<6} p={p:<8} delta={entry['cliffs_delta']:+.3f} ({entry['magnitude']})")
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GranularityMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except CogniLocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if out:
        _write(out, _dump(payload))
    return EXIT_OK


def cmd_classify(bugs: str) -> int:
    try:
        reports = load_bug_reports(bugs)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CogniLocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    counts = {"ST": 0, "PE": 0, "NL": 0}
    for r in reports:
        kind = classify_report(r)
        counts[kind] += 1
        print(f"{r.id}\t{kind}")
    print("totals " + " ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cogniloc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and save the graph index for one fixture")
    p.add_argument("fixture")
    p.add_argument("--out", required=True, help="index directory, or a *.gz file path")

    p = sub.add_parser("localize", help="run the pipeline over a bug-reports file")
    p.add_argument("--bugs", required=True)
    p.add_argument("--index-dir", required=True)
    p.add_argument("--config", default=None, help="run config (falls back to $COGNILOC_CONFIG)")
    p.add_argument("--out", required=True)
    p.add_argument("--audit-dir", default=None)

    p = sub.add_parser("evaluate", help="score a results file against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--bugs", required=True)
    p.add_argument("--granularity", choices=("method", "document"), default="method")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--compare", default=None, help="second results file for paired tests")
    p.add_argument("--out", default=None, help="write the report as JSON here")

    p = sub.add_parser("classify", help="label bug reports ST / PE / NL")
    p.add_argument("--bugs", required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "index":
        return cmd_index(args.fixture, args.out)
    if args.command == "localize":
        return cmd_localize(args.bugs, args.index_dir, args.config, args.out, args.audit_dir)
    if args.command == "evaluate":
        return cmd_evaluate(args.results, args.bugs, args.granularity, args.k, args.compare, args.out)
    if args.command == "classify":
        return cmd_classify(args.bugs)
    raise ConfigError(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
