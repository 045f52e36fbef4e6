"""Command-line front end.

Exit codes: 0 ok, 1 usage, 2 query error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence, TextIO

import numpy as np

from . import bench, datagen, loader
from .database import Database
from .errors import ArcError, QueryError
from .model import EdgeRef, VertexId

EXIT_OK, EXIT_USAGE, EXIT_QUERY, EXIT_DATA = 0, 1, 2, 3
DATA_ENV = "ARCFORGE_DATA"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which means "query error" here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- rendering ----------------------------------------------------------------


def format_value(value: Any, db: Database | None = None) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, VertexId):
        if db is not None:
            try:
                return f"({db.catalog.vertex_label_by_id(value.label_id).name}:{value.local_id})"
            except ArcError:
                pass
        return f"({value.label_id}:{value.local_id})"
    if isinstance(value, EdgeRef):
        return f"[{format_value(value.src, db)}-{value.edge_label_id}:{value.edge_id}->{format_value(value.dst, db)}]"
    if isinstance(value, np.ndarray):
        return "[" + ", ".join(repr(float(x)) for x in value) + "]"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, default=str)
    return str(value)


def render_rows(columns: list[str], rows: list[tuple], fmt: str = "table",
                db: Database | None = None) -> str:
    cells = [[format_value(v, db) for v in row] for row in rows]
    if fmt == "tsv":
        return "\n".join(["\t".join(columns)] + ["\t".join(r) for r in cells])
    widths = [len(c) for c in columns]
    for r in cells:
        widths = [max(w, len(c)) for w, c in zip(widths, r)]
    line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    out = [line, "| " + " | ".join(c.ljust(w) for c, w in zip(columns, widths)) + " |", line]
    out += ["| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |" for r in cells]
    out.append(line)
    return "\n".join(out)


# -- helpers ------------------------------------------------------------------


def _data_dir(args) -> Path:
    path = args.data or os.environ.get(DATA_ENV)
    if not path:
        raise UsageError(f"no data directory: pass --data or set {DATA_ENV}")
    return Path(path)


def _open(args, must_exist: bool = True) -> Database:
    path = _data_dir(args)
    if must_exist and not (path / "wal").is_dir():
        raise ArcError(f"{path} is not an initialised data directory (run 'init' first)")
    return Database(path, durability=args.durability)


def _params(args) -> dict:
    if getattr(args, "params_file", None):
        text = Path(args.params_file).read_text(encoding="utf-8")
    elif getattr(args, "params", None):
        text = args.params
    else:
        return {}
    try:
        params = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"parameters are not valid JSON: {exc}") from exc
    if not isinstance(params, dict):
        raise UsageError("parameters must be a JSON object")
    return params


def run_script(db: Database, text: str, params: dict, out: TextIO, err: TextIO, *,
               fmt: str = "table", batch_size: int | None = None, workers: int | None = None,
               timing: bool = True) -> None:
    from .query import parse_script, run_statement
    from .query.planner import normalize_params
    params = normalize_params(params)
    for stmt in parse_script(text):
        result = run_statement(db, stmt, params, batch_size=batch_size or db.batch_size,
                               workers=workers or db.workers)
        if result.columns:
            print(render_rows(result.columns, result.rows, fmt, db), file=out)
        if timing:
            print(f"({len(result.rows)} rows, {result.elapsed_ms:.3f} ms)", file=err if fmt == "tsv" else out)


# -- subcommands --------------------------------------------------------------


def cmd_init(args) -> int:
    path = Path(args.dir)
    if (path / "wal").is_dir() and any((path / "wal").iterdir()):
        raise ArcError(f"{path} already holds a database")
    schema = {}
    if args.schema:
        try:
            schema = json.loads(Path(args.schema).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ArcError(f"cannot read schema file: {exc}") from exc
    with Database(path, durability=args.durability) as db:
        if schema:
            db.define_schema(schema)
        db.checkpoint()
        labels = sorted(db.catalog.vertex_labels), sorted(db.catalog.edge_labels)
    print(f"initialised {path} (vertex labels: {', '.join(labels[0]) or '-'}; "
          f"edge labels: {', '.join(labels[1]) or '-'})")
    return EXIT_OK


def cmd_load(args) -> int:
    with _open(args) as db:
        try:
            report = loader.load(db, args.manifest, args.max_reject_ratio)
        finally:
            if not args.no_checkpoint:
                db.checkpoint()
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def cmd_query(args) -> int:
    if args.file:
        text = Path(args.file).read_text(encoding="utf-8")
    else:
        text = args.execute
    with _open(args) as db:
        run_script(db, text, _params(args), sys.stdout, sys.stderr, fmt=args.format,
                   batch_size=args.batch_size, workers=args.workers, timing=not args.no_timing)
    return EXIT_OK


def cmd_explain(args) -> int:
    with _open(args) as db:
        print(db.explain(args.execute, _params(args), optimize=not args.no_optimize))
    return EXIT_OK


SHELL_HELP = """statements end with ';'
:params {json}   set query parameters
:format table|tsv
:quit            leave the shell"""


def shell(db: Database, inp: TextIO, out: TextIO, interactive: bool = True) -> int:
    """Read ';'-terminated statements until EOF; errors are reported, not fatal."""
    params: dict = {}
    fmt = "table"
    buf: list[str] = []
    failures = 0
    while True:
        if interactive:
            out.write("arcforge> " if not buf else "      ... ")
            out.flush()
        line = inp.readline()
        if not line:
            break
        stripped = line.strip()
        if not buf and stripped.startswith(":"):
            cmd, _, rest = stripped.partition(" ")
            if cmd in (":quit", ":q", ":exit"):
                break
            if cmd == ":params":
                try:
                    params = json.loads(rest or "{}")
                except json.JSONDecodeError as exc:
                    print(f"error: {exc}", file=out)
            elif cmd == ":format" and rest in ("table", "tsv"):
                fmt = rest
            else:
                print(SHELL_HELP, file=out)
            continue
        buf.append(line)
        if not stripped.endswith(";"):
            continue
        text, buf = "".join(buf), []
        try:
            run_script(db, text, params, out, out, fmt=fmt)
        except QueryError as exc:
            failures += 1
            print(f"{type(exc).__name__}: {exc}", file=out)
    if "".join(buf).strip():
        try:
            run_script(db, "".join(buf), params, out, out, fmt=fmt)
        except QueryError as exc:
            failures += 1
            print(f"{type(exc).__name__}: {exc}", file=out)
    return EXIT_QUERY if failures and not interactive else EXIT_OK


def cmd_shell(args) -> int:
    with _open(args) as db:
        return shell(db, sys.stdin, sys.stdout, sys.stdin.isatty())


def _threshold(text: str) -> int | None:
    if text.lower() in ("inf", "none", "infinity"):
        return None
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("threshold must be >= 0 or 'inf'")
    return value


def cmd_bench(args) -> int:
    if args.suite == "traversal":
        db = _open(args) if args.loaded else None
        try:
            report = bench.traversal(runs=args.runs, threshold=args.threshold, baseline=args.baseline,
                                     persons=args.persons, edges=args.edges, seed=args.seed, db=db)
        finally:
            if db is not None:
                db.close()
        for row in report["rows"]:
            for name, runs in row["runs_ms"].items():
                print(f"Q{row['query']} [{name}] {{{', '.join(f'{t:.1f}' for t in runs)}}} "
                      f"median {row['median_ms'][name]:.2f} ms")
            print(f"    {row['text']}")
    elif args.suite == "footprint":
        thresholds = bench.FOOTPRINT_THRESHOLDS if args.threshold is bench.DEFAULT_THRESHOLD \
            and not args.only else [args.threshold]
        report = bench.footprint(thresholds=thresholds, persons=args.persons, edges=args.edges,
                                 seed=args.seed)
        for row in report["rows"]:
            print(f"threshold={row['threshold']:>4}  topology {row['topology_bytes'] / 2**20:9.1f} MiB  "
                  f"small={row['small_collections']} large={row['large_collections']}")
    else:
        report = bench.vector(points=args.points, dim=args.dim, queries=args.queries, k=args.k,
                              metric=args.metric, seed=args.seed, ef_search=args.ef)
        row = report["rows"][0]
        print(f"recall@{row['k']} {row['recall']:.4f}  mean latency {row['mean_latency_ms']:.3f} ms  "
              f"build {row['build_seconds']:.1f} s")
    for name, value in report["checks"].items():
        print(f"check {name}: {value}")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_checkpoint(args) -> int:
    with _open(args) as db:
        lsn = db.checkpoint()
        if args.prune:
            db.prune(lsn)
    print(f"checkpoint at lsn {lsn}")
    return EXIT_OK


def cmd_stats(args) -> int:
    with _open(args) as db:
        stats = db.stats()
        stats["degree"] = loader.degree_report(db)
    print(json.dumps(stats, indent=2, default=str))
    return EXIT_OK


def cmd_writeback(args) -> int:
    from . import analytics
    with _open(args) as db:
        if args.procedure == "pagerank":
            result = analytics.pagerank(db, args.damping, args.max_iter, args.tol)
        else:
            result = analytics.weakly_connected_components(db)
        n = analytics.writeback(db, result, args.field)
    print(f"updated {n} vertices ({json.dumps(result.metadata)})")
    return EXIT_OK


def cmd_gen(args) -> int:
    graph = datagen.social_graph(args.persons, args.edges, args.seed)
    path = datagen.write_csv(graph, args.dir, args.delimiter)
    print(f"wrote {graph.n_persons} persons and {graph.n_edges} edges; manifest {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arcforge", description="Embeddable graph + vector database")
    p.add_argument("--data", help=f"data directory (default ${DATA_ENV})")
    p.add_argument("--durability", choices=["sync", "group"], default="sync")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("init", help="create a data directory")
    s.add_argument("dir")
    s.add_argument("--schema", help="JSON schema file")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("load", help="ingest CSV files listed in a manifest")
    s.add_argument("manifest")
    s.add_argument("--max-reject-ratio", type=float, default=None)
    s.add_argument("--no-checkpoint", action="store_true")
    s.set_defaults(func=cmd_load)

    s = sub.add_parser("shell", help="interactive query shell")
    s.set_defaults(func=cmd_shell)

    for name, func in (("query", cmd_query), ("explain", cmd_explain)):
        s = sub.add_parser(name, help=f"{name} a statement")
        if name == "query":
            g = s.add_mutually_exclusive_group(required=True)
            g.add_argument("-e", "--execute")
            g.add_argument("-f", "--file")
            s.add_argument("--format", choices=["table", "tsv"], default="table")
            s.add_argument("--batch-size", type=int, default=None)
            s.add_argument("--workers", type=int, default=None)
            s.add_argument("--no-timing", action="store_true")
        else:
            s.add_argument("-e", "--execute", required=True)
            s.add_argument("--no-optimize", action="store_true")
        s.add_argument("--params", help="JSON object of parameters")
        s.add_argument("--params-file")
        s.set_defaults(func=func)

    s = sub.add_parser("bench", help="run a benchmark suite")
    s.add_argument("suite", choices=sorted(bench.SUITES))
    s.add_argument("--threshold", type=_threshold, default=bench.DEFAULT_THRESHOLD)
    s.add_argument("--baseline", type=_threshold, default=0)
    s.add_argument("--only", action="store_true", help="footprint: measure --threshold alone")
    s.add_argument("--runs", type=int, default=5)
    s.add_argument("--json", help="write the report here")
    s.add_argument("--persons", type=int, default=100_000)
    s.add_argument("--edges", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--loaded", action="store_true", help="traversal: time the data directory")
    s.add_argument("--points", type=int, default=10_000)
    s.add_argument("--dim", type=int, default=64)
    s.add_argument("--queries", type=int, default=100)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--metric", choices=["cosine", "euclidean", "dot"], default="cosine")
    s.add_argument("--ef", type=int, default=None)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("checkpoint", help="write a checkpoint")
    s.add_argument("--prune", action="store_true", help="also drop covered WAL segments")
    s.set_defaults(func=cmd_checkpoint)

    s = sub.add_parser("stats", help="print engine statistics")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("writeback", help="run an analytic and store its result")
    s.add_argument("procedure", choices=["pagerank", "wcc"])
    s.add_argument("field")
    s.add_argument("--damping", type=float, default=0.85)
    s.add_argument("--max-iter", type=int, default=50)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_writeback)

    s = sub.add_parser("gen", help="write a synthetic person/knows CSV dataset")
    s.add_argument("dir")
    s.add_argument("--persons", type=int, default=10_000)
    s.add_argument("--edges", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--delimiter", choices=["|", ","], default="|")
    s.set_defaults(func=cmd_gen)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QueryError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_QUERY
    except (ArcError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
