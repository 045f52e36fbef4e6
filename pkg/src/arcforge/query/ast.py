"""Syntax tree for parsed queries.

Every node converts to a plain nested structure with :func:`to_data`, which
is what snapshot tests compare against.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, is_dataclass
from typing import Any


# -- expressions --------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    value: Any


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Prop:
    subject: Any
    key: str


@dataclass(frozen=True)
class ListLit:
    items: tuple
    array: bool = False   # written with the ARRAY keyword


@dataclass(frozen=True)
class MapLit:
    items: tuple   # ((key, expr), ...)


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple
    star: bool = False


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Any
    right: Any


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: Any


@dataclass(frozen=True)
class IsNull:
    operand: Any
    negated: bool = False


# -- patterns -----------------------------------------------------------------

@dataclass(frozen=True)
class NodePattern:
    var: str | None
    label: str | None
    props: MapLit | None = None


@dataclass(frozen=True)
class RelPattern:
    var: str | None
    label: str | None
    direction: str            # "out", "in" or "both"
    min_hops: int = 1
    max_hops: int = 1
    var_length: bool = False
    props: MapLit | None = None


@dataclass(frozen=True)
class PathPattern:
    nodes: tuple
    rels: tuple


# -- clauses ------------------------------------------------------------------

@dataclass(frozen=True)
class MatchClause:
    patterns: tuple
    where: Any = None


@dataclass(frozen=True)
class CallClause:
    procedure: str
    args: tuple
    yields: tuple | None = None   # ((column, alias), ...) or None for all
    where: Any = None


@dataclass(frozen=True)
class CreateClause:
    patterns: tuple


@dataclass(frozen=True)
class ReturnItem:
    expr: Any
    alias: str | None
    text: str


@dataclass(frozen=True)
class SortItem:
    expr: Any
    descending: bool
    text: str


@dataclass(frozen=True)
class ReturnClause:
    items: tuple
    distinct: bool = False
    order_by: tuple = ()
    skip: Any = None
    limit: Any = None


@dataclass(frozen=True)
class Query:
    clauses: tuple
    ret: ReturnClause | None = None


@dataclass(frozen=True)
class CreateVectorIndex:
    name: str
    label: str
    field: str
    options: MapLit


@dataclass(frozen=True)
class Explain:
    statement: Any


def to_data(node: Any) -> Any:
    """Plain, JSON-compatible rendering of a tree (for snapshots and debugging)."""
    if is_dataclass(node):
        out = {"node": type(node).__name__}
        for f in fields(node):
            out[f.name] = to_data(getattr(node, f.name))
        return out
    if isinstance(node, (tuple, list)):
        return [to_data(x) for x in node]
    if isinstance(node, float):
        return {"float": repr(node)}
    return node
