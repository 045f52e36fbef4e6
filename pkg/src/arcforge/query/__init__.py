"""Query front-end: parse, plan, optimize, execute."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

from ..errors import QueryError, SemanticError, UnknownField, UnknownLabel
from . import ast
from .executor import DEFAULT_BATCH_SIZE, ExecContext, execute
from .parser import parse, parse_script
from .plan import PlanOp, pipelines, render_plan
from .planner import normalize_params, plan_statement

__all__ = ["QueryResult", "explain", "parse", "parse_script", "plan_query", "run_query", "run_statement"]


@dataclass
class QueryResult:
    columns: list[str]
    rows: list[tuple]
    elapsed_ms: float = 0.0
    plan: str = ""
    counters: list[dict] = field(default_factory=list)
    pipelines: int = 1

    def __len__(self) -> int:
        return len(self.rows)

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _metrics(db) -> dict[str, str]:
    return {name: coll.metric for name, coll in db.collections.items()}


def plan_query(db, stmt: Any, params: dict, optimize: bool = True,
               ef_search: int | None = None) -> tuple[PlanOp, bool]:
    try:
        return plan_statement(stmt, db.catalog, params, _metrics(db), optimize, ef_search)
    except (UnknownLabel, UnknownField) as exc:
        raise SemanticError(str(exc)) from exc


def explain(db, text: str, params: dict | None = None, optimize: bool = True) -> str:
    """Rendered plan of ``text`` (a leading EXPLAIN keyword is accepted)."""
    stmt = parse(text)
    if isinstance(stmt, ast.Explain):
        stmt = stmt.statement
    params = normalize_params(params)
    with db.lock.read():
        root, _ = plan_query(db, stmt, params, optimize)
    return render_plan(root)


def run_statement(db, stmt: Any, params: dict, *, batch_size: int = DEFAULT_BATCH_SIZE,
                  workers: int = 1, optimize: bool = True, ef_search: int | None = None) -> QueryResult:
    t0 = time.perf_counter()
    if isinstance(stmt, ast.Explain):
        with db.lock.read():
            root, _ = plan_query(db, stmt.statement, params, optimize, ef_search)
        text = render_plan(root)
        return QueryResult(["plan"], [(line,) for line in text.splitlines()],
                           (time.perf_counter() - t0) * 1000.0, text)
    # planning needs a stable catalog, so it happens under the same lock as execution
    with db.lock.read():
        root, writes = plan_query(db, stmt, params, optimize, ef_search)
    lock = db.lock.write() if writes else db.lock.read()
    with lock:
        if writes:
            root, _ = plan_query(db, stmt, params, optimize, ef_search)
        ctx = ExecContext(db, params, batch_size, ef_search)
        rows, stats = execute(root, ctx, workers)
    return QueryResult(list(root.columns), rows, (time.perf_counter() - t0) * 1000.0,
                       render_plan(root), stats.counters, stats.pipelines)


def run_query(db, text: str, params: dict | None = None, *, batch_size: int = DEFAULT_BATCH_SIZE,
              workers: int = 1, optimize: bool = True, ef_search: int | None = None) -> QueryResult:
    """Parse and run one statement against ``db``."""
    return run_statement(db, parse(text), normalize_params(params), batch_size=batch_size,
                         workers=workers, optimize=optimize, ef_search=ef_search)
