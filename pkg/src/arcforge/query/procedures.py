"""Procedures reachable through ``CALL``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .. import analytics
from ..errors import ParameterError
from .expr import is_number


@dataclass(frozen=True)
class Procedure:
    name: str
    min_args: int
    max_args: int
    outputs: tuple[tuple[str, str], ...]   # (column, kind) with kind "vertex" or "value"
    run: Callable[[Any, list], list[tuple]]
    writes: bool = False


def _number(value: Any, what: str) -> float:
    if not is_number(value):
        raise ParameterError(f"{what} must be a number, got {value!r}")
    return float(value)


def _integer(value: Any, what: str) -> int:
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParameterError(f"{what} must be an integer, got {value!r}")
    return value


def _pagerank_args(args: list) -> tuple[float, int, float]:
    damping = _number(args[0], "damping") if len(args) > 0 else 0.85
    max_iter = _integer(args[1], "max_iter") if len(args) > 1 else 50
    tol = _number(args[2], "tol") if len(args) > 2 else 1e-8
    if not 0 < damping < 1 or max_iter < 1 or not tol > 0:
        raise ParameterError("pagerank needs 0 < damping < 1, max_iter >= 1 and tol > 0")
    return damping, max_iter, tol


def _run_pagerank(db, args: list) -> list[tuple]:
    return analytics.pagerank(db, *_pagerank_args(args)).rows


def _run_wcc(db, args: list) -> list[tuple]:
    return analytics.weakly_connected_components(db).rows


def _run_writeback(db, args: list) -> list[tuple]:
    proc, field_name = args[0], args[1]
    if not isinstance(proc, str) or not isinstance(field_name, str):
        raise ParameterError("writeback(procedure, field, ...) takes two strings first")
    if proc == "pagerank":
        result = analytics.pagerank(db, *_pagerank_args(args[2:]))
    elif proc == "wcc":
        result = analytics.weakly_connected_components(db)
    else:
        raise ParameterError(f"writeback supports pagerank and wcc, not {proc!r}")
    return [(analytics.writeback(db, result, field_name),)]


def _run_vector_search(db, args: list) -> list[tuple]:
    name, query, k = args[0], args[1], _integer(args[2], "k")
    ef = _integer(args[3], "ef") if len(args) > 3 and args[3] is not None else None
    if not isinstance(name, str):
        raise ParameterError("collection name must be a string")
    if k < 1:
        raise ParameterError("k must be >= 1")
    coll = db.collection(name)
    return [(h.key, h.score) for h in coll.search(query, k, ef)]


PROCEDURES = {p.name: p for p in (
    Procedure("pagerank", 0, 3, (("vertex", "vertex"), ("score", "value")), _run_pagerank),
    Procedure("wcc", 0, 0, (("vertex", "vertex"), ("component", "vertex")), _run_wcc),
    Procedure("writeback", 2, 5, (("updated", "value"),), _run_writeback, writes=True),
    Procedure("vector.search", 3, 4, (("vertex", "vertex"), ("score", "value")), _run_vector_search),
)}
