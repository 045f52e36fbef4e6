"""Column-at-a-time evaluation of query expressions.

An expression compiles to a function ``fn(batch, ctx) -> list`` producing one
value per row of the batch.  Null handling follows Cypher: comparisons and
arithmetic with null give null, and boolean operators use three-valued logic.
"""

from __future__ import annotations

import math
import operator
from typing import Any, Callable

import numpy as np

from ..errors import ArcError, DimensionMismatch, ParameterError, QueryRuntimeError, TypeMismatch
from ..model import EdgeRef, VertexId, as_vector, values_equal
from ..vector.distance import scores_many
from . import ast as A

Fn = Callable[["RowBatchLike", Any], list]

_ORDER_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


def is_number(v: Any) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, (bool, np.bool_))


def is_vector(v: Any) -> bool:
    if isinstance(v, np.ndarray):
        return v.ndim == 1
    return isinstance(v, list) and bool(v) and all(is_number(x) for x in v)


def compare(op: str, a: Any, b: Any) -> bool | None:
    if a is None or b is None:
        return None
    if op in ("=", "<>"):
        if is_vector(a) or is_vector(b):
            if not (is_vector(a) and is_vector(b)):
                eq = False
            else:
                eq = values_equal(as_vector(a), as_vector(b))
        elif is_number(a) and is_number(b):
            eq = a == b
        elif isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)) \
                and not isinstance(a, VertexId) and not isinstance(b, VertexId):
            eq = len(a) == len(b) and all(compare("=", x, y) for x, y in zip(a, b))
        else:
            eq = type(a) is type(b) and a == b
        return eq if op == "=" else not eq
    fn = _ORDER_OPS[op]
    if is_number(a) and is_number(b):
        return fn(a, b)
    if isinstance(a, str) and isinstance(b, str):
        return fn(a, b)
    if isinstance(a, bool) and isinstance(b, bool):
        return fn(a, b)
    if isinstance(a, VertexId) and isinstance(b, VertexId):
        return fn(tuple(a), tuple(b))
    return None


def _arith(op: str, a: Any, b: Any) -> Any:
    if a is None or b is None:
        return None
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    if op == "+" and isinstance(a, list) and isinstance(b, list):
        return a + b
    if not (is_number(a) and is_number(b)):
        raise QueryRuntimeError(f"cannot apply {op!r} to {type(a).__name__} and {type(b).__name__}")
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    ints = isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer))
    if op == "/":
        if ints:
            if b == 0:
                raise QueryRuntimeError("integer division by zero")
            q = abs(a) // abs(b)
            return q if (a >= 0) == (b >= 0) else -q
        return a / b if b != 0 else (math.copysign(math.inf, a) * math.copysign(1, b) if a else math.nan)
    if op == "%":
        if ints:
            if b == 0:
                raise QueryRuntimeError("integer modulo by zero")
            return int(math.fmod(a, b))
        return math.fmod(a, b) if b != 0 else math.nan
    raise QueryRuntimeError(f"unknown operator {op!r}")


def _and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _xor(a, b):
    if a is None or b is None:
        return None
    return a != b


def _bool(v: Any) -> bool | None:
    if v is None or isinstance(v, bool):
        return v
    raise QueryRuntimeError(f"expected a boolean, got {v!r}")


def truthy(values: list) -> list[bool]:
    """Filter semantics: only True passes."""
    return [v is True for v in values]


# -- attribute access ---------------------------------------------------------

def read_property(ctx, subject: Any, key: str) -> Any:
    if subject is None:
        return None
    if isinstance(subject, EdgeRef):
        ldef = ctx.catalog.edge_label_by_id(subject.edge_label_id)
        if key not in ldef.fields:
            return None
        return ctx.engine.read_attribute(subject, key)
    if isinstance(subject, VertexId):
        ldef = ctx.catalog.vertex_label_by_id(subject.label_id)
        if key not in ldef.fields:
            return None
        return ctx.engine.read_attribute(subject, key)
    if isinstance(subject, dict):
        return subject.get(key)
    raise QueryRuntimeError(f"cannot read property {key!r} of {type(subject).__name__}")


# -- functions ----------------------------------------------------------------

def _vector_arg(value: Any, is_param: bool, dim: int | None = None) -> np.ndarray:
    try:
        return as_vector(value, dim)
    except (TypeMismatch, DimensionMismatch) as exc:
        if is_param:
            raise ParameterError(f"parameter is not a usable vector: {exc}") from exc
        raise QueryRuntimeError(str(exc)) from exc


def _vector_fn(kind: str, args: list[Fn], param_flags: list[bool]) -> Fn:
    a_fn, b_fn, m_fn = args

    def run(batch, ctx):
        a_vals, b_vals = a_fn(batch, ctx), b_fn(batch, ctx)
        metric = m_fn(batch, ctx)[0] if len(batch) else "cosine"
        out: list = [None] * len(batch)
        rows = [i for i, (x, y) in enumerate(zip(a_vals, b_vals)) if x is not None and y is not None]
        if not rows:
            return out
        # constant operand on one side is the common case: one matrix op per batch
        av = [_vector_arg(a_vals[i], param_flags[0]) for i in rows]
        bv = [_vector_arg(b_vals[i], param_flags[1]) for i in rows]
        if any(x.shape != av[0].shape for x in av + bv):
            exc = DimensionMismatch(f"vector dimensions differ: {av[0].shape[0]} vs "
                                    f"{next(x for x in av + bv if x.shape != av[0].shape).shape[0]}")
            if param_flags[0] or param_flags[1]:
                raise ParameterError(str(exc))
            raise QueryRuntimeError(str(exc))
        if all(x is bv[0] for x in bv) or all(values_equal(x, bv[0]) for x in bv):
            scores = scores_many(metric, np.stack(av), bv[0])
        else:
            scores = np.array([scores_many(metric, x[None, :], y)[0] for x, y in zip(av, bv)])
        for i, s in zip(rows, scores.tolist()):
            if kind == "similarity":
                out[i] = s
            else:
                out[i] = 1.0 - s if metric == "cosine" else -s
        return out

    return run


def _scalar(fn: Callable[..., Any]) -> Callable[[list[Fn]], Fn]:
    def build(args: list[Fn]) -> Fn:
        def run(batch, ctx):
            cols = [a(batch, ctx) for a in args]
            return [fn(ctx, *vals) for vals in zip(*cols)] if cols else [fn(ctx) for _ in range(len(batch))]
        return run
    return build


def _f_id(ctx, x):
    if x is None:
        return None
    if isinstance(x, VertexId):
        return x.local_id
    if isinstance(x, EdgeRef):
        return x.edge_id
    raise QueryRuntimeError("id() expects a vertex or an edge")


def _f_label(ctx, x):
    if x is None:
        return None
    if isinstance(x, VertexId):
        return ctx.catalog.vertex_label_by_id(x.label_id).name
    if isinstance(x, EdgeRef):
        return ctx.catalog.edge_label_by_id(x.edge_label_id).name
    raise QueryRuntimeError("label() expects a vertex or an edge")


def _f_norm(ctx, x):
    if x is None:
        return None
    v = _vector_arg(x, False).astype(np.float64)
    return float(math.sqrt(float(v @ v)))


def _f_size(ctx, x):
    if x is None:
        return None
    if isinstance(x, (str, list, tuple, np.ndarray)):
        return len(x)
    raise QueryRuntimeError("size() expects a string or a list")


def _f_abs(ctx, x):
    if x is None:
        return None
    if not is_number(x):
        raise QueryRuntimeError("abs() expects a number")
    return abs(x)


def _f_coalesce(ctx, *xs):
    return next((x for x in xs if x is not None), None)


def _f_tostring(ctx, x):
    return None if x is None else str(x)


def _f_tointeger(ctx, x):
    if x is None:
        return None
    try:
        return int(float(x)) if isinstance(x, str) else int(x)
    except (TypeError, ValueError):
        return None


def _f_tofloat(ctx, x):
    if x is None:
        return None
    try:
        return float(x)
    except (TypeError, ValueError):
        return None


SCALAR_FUNCTIONS = {
    "id": (1, 1, _scalar(_f_id)),
    "label": (1, 1, _scalar(_f_label)),
    "vector_norm": (1, 1, _scalar(_f_norm)),
    "size": (1, 1, _scalar(_f_size)),
    "abs": (1, 1, _scalar(_f_abs)),
    "coalesce": (1, 64, _scalar(_f_coalesce)),
    "tostring": (1, 1, _scalar(_f_tostring)),
    "tointeger": (1, 1, _scalar(_f_tointeger)),
    "tofloat": (1, 1, _scalar(_f_tofloat)),
}
VECTOR_FUNCTIONS = {"vector_distance": "distance", "vector_similarity": "similarity"}
AGGREGATES = {"count"}


def contains_aggregate(expr: Any) -> bool:
    if isinstance(expr, A.FuncCall):
        return expr.name in AGGREGATES or any(contains_aggregate(a) for a in expr.args)
    if isinstance(expr, A.BinOp):
        return contains_aggregate(expr.left) or contains_aggregate(expr.right)
    if isinstance(expr, (A.UnaryOp, A.IsNull)):
        return contains_aggregate(expr.operand)
    if isinstance(expr, A.Prop):
        return contains_aggregate(expr.subject)
    if isinstance(expr, A.ListLit):
        return any(contains_aggregate(x) for x in expr.items)
    return False


# -- compilation --------------------------------------------------------------

def compile_expr(expr: Any, columns: dict[str, str] | None = None) -> Fn:
    """Compile ``expr``; ``columns`` maps expression text to an existing column."""
    columns = columns or {}

    def c(e: Any) -> Fn:
        if isinstance(e, A.Literal):
            v = e.value
            return lambda batch, ctx: [v] * len(batch)
        if isinstance(e, A.Param):
            name = e.name
            return lambda batch, ctx: [ctx.param(name)] * len(batch)
        if isinstance(e, A.Var):
            name = columns.get(e.name, e.name)
            return lambda batch, ctx: batch.column(name)
        if isinstance(e, A.Prop):
            sub = c(e.subject)
            key = e.key
            return lambda batch, ctx: [read_property(ctx, s, key) for s in sub(batch, ctx)]
        if isinstance(e, A.ListLit):
            items = [c(x) for x in e.items]
            return lambda batch, ctx: [list(vals) for vals in zip(*[f(batch, ctx) for f in items])] \
                if items else [[] for _ in range(len(batch))]
        if isinstance(e, A.MapLit):
            keys = [k for k, _ in e.items]
            vals = [c(x) for _, x in e.items]
            return lambda batch, ctx: [dict(zip(keys, row)) for row in zip(*[f(batch, ctx) for f in vals])] \
                if vals else [{} for _ in range(len(batch))]
        if isinstance(e, A.IsNull):
            sub = c(e.operand)
            neg = e.negated
            return lambda batch, ctx: [(v is not None) if neg else (v is None) for v in sub(batch, ctx)]
        if isinstance(e, A.UnaryOp):
            sub = c(e.operand)
            if e.op == "NOT":
                return lambda batch, ctx: [None if v is None else not _bool(v) for v in sub(batch, ctx)]
            return lambda batch, ctx: [_arith("-", 0, v) for v in sub(batch, ctx)]
        if isinstance(e, A.BinOp):
            left, right = c(e.left), c(e.right)
            op = e.op
            if op in ("AND", "OR", "XOR"):
                fn = {"AND": _and, "OR": _or, "XOR": _xor}[op]
                return lambda batch, ctx: [fn(_bool(a), _bool(b))
                                           for a, b in zip(left(batch, ctx), right(batch, ctx))]
            if op in ("=", "<>", "<", "<=", ">", ">="):
                return lambda batch, ctx: [compare(op, a, b)
                                           for a, b in zip(left(batch, ctx), right(batch, ctx))]
            return lambda batch, ctx: [_arith(op, a, b) for a, b in zip(left(batch, ctx), right(batch, ctx))]
        if isinstance(e, A.FuncCall):
            text = columns.get(render(e))
            if text is not None:
                return lambda batch, ctx: batch.column(text)
            if e.name in VECTOR_FUNCTIONS:
                args = [c(x) for x in e.args]
                flags = [isinstance(x, A.Param) for x in e.args]
                return _vector_fn(VECTOR_FUNCTIONS[e.name], args, flags)
            if e.name in SCALAR_FUNCTIONS:
                return SCALAR_FUNCTIONS[e.name][2]([c(x) for x in e.args])
            raise QueryRuntimeError(f"function {e.name}() cannot be evaluated here")
        raise QueryRuntimeError(f"cannot evaluate {type(e).__name__}")

    return c(expr)


def render(e: Any) -> str:
    """Canonical text of an expression (used for column names and explain output)."""
    if isinstance(e, A.Literal):
        v = e.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return "'" + v.replace("\\", "\\\\").replace("'", "\\'") + "'"
        return repr(v)
    if isinstance(e, A.Param):
        return "$" + e.name
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.Prop):
        return f"{render(e.subject)}.{e.key}"
    if isinstance(e, A.ListLit):
        inner = ", ".join(render(x) for x in e.items)
        return f"ARRAY[{inner}]" if e.array else f"[{inner}]"
    if isinstance(e, A.MapLit):
        return "{" + ", ".join(f"{k}: {render(v)}" for k, v in e.items) + "}"
    if isinstance(e, A.FuncCall):
        if e.star:
            return f"{e.name}(*)"
        return f"{e.name}({', '.join(render(x) for x in e.args)})"
    if isinstance(e, A.BinOp):
        return f"({render(e.left)} {e.op} {render(e.right)})"
    if isinstance(e, A.UnaryOp):
        return f"(NOT {render(e.operand)})" if e.op == "NOT" else f"(-{render(e.operand)})"
    if isinstance(e, A.IsNull):
        return f"({render(e.operand)} IS {'NOT ' if e.negated else ''}NULL)"
    return str(e)


def wrap_storage_errors(fn):
    """Re-raise engine errors during execution as QueryRuntimeError."""
    def run(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (QueryRuntimeError, ParameterError):
            raise
        except ArcError as exc:
            raise QueryRuntimeError(f"{type(exc).__name__}: {exc}") from exc
    return run
