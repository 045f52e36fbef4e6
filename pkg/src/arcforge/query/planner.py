"""Semantic analysis, logical planning and rule-based rewrites."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ..catalog import Catalog
from ..errors import ParameterError, SemanticError, UnknownField, UnknownLabel
from ..model import FieldType
from ..vector.distance import check_metric
from . import ast as A
from . import plan as P
from .expr import (
    AGGREGATES,
    SCALAR_FUNCTIONS,
    VECTOR_FUNCTIONS,
    contains_aggregate,
    is_number,
    is_vector,
    render,
)
from .procedures import PROCEDURES

VERTEX, EDGE, PATH, VALUE = "vertex", "edge", "path", "value"
PUSHABLE_OPS = ("=", "<>", "<", "<=", ">", ">=")
_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "<>": "<>"}


@dataclass
class VarInfo:
    kind: str
    label: str | None = None


def render_pattern(path: A.PathPattern) -> str:
    def node(n: A.NodePattern) -> str:
        s = n.var or ""
        if n.label:
            s += f":{n.label}"
        if n.props is not None:
            s += " " + render(n.props)
        return f"({s})"

    out = node(path.nodes[0])
    for rel, nxt in zip(path.rels, path.nodes[1:]):
        body = (rel.var or "") + (f":{rel.label}" if rel.label else "")
        if rel.var_length:
            body += f"*{rel.min_hops}..{rel.max_hops}"
        if rel.props is not None:
            body += " " + render(rel.props)
        left, right = {"out": ("-", "->"), "in": ("<-", "-"), "both": ("-", "-")}[rel.direction]
        out += f"{left}[{body}]{right}{node(nxt)}"
    return out


def normalize_params(params: dict | None) -> dict:
    return {str(k).lstrip("$"): v for k, v in (params or {}).items()}


class Planner:
    def __init__(self, catalog: Catalog, params: dict):
        self.catalog = catalog
        self.params = params
        self.scope: dict[str, VarInfo] = {}
        self._anon = 0
        self.writes = False

    # -- helpers --------------------------------------------------------------

    def anon(self) -> str:
        self._anon += 1
        return f" anon{self._anon}"

    def vertex_label_id(self, label: str | None) -> int | None:
        if label is None:
            return None
        try:
            return self.catalog.vertex_label(label).id
        except UnknownLabel:
            raise SemanticError(f"unknown vertex label {label!r}") from None

    def edge_label_id(self, label: str | None) -> int | None:
        if label is None:
            return None
        try:
            return self.catalog.edge_label(label).id
        except UnknownLabel:
            raise SemanticError(f"unknown edge label {label!r}") from None

    def field_type(self, info: VarInfo, key: str, var: str) -> FieldType | None:
        """Declared type of ``var.key``; None when the label is open."""
        if info.kind == VERTEX:
            defs = [self.catalog.vertex_label(info.label)] if info.label else \
                list(self.catalog.vertex_labels.values())
        elif info.kind == EDGE:
            defs = [self.catalog.edge_label(info.label)] if info.label else \
                list(self.catalog.edge_labels.values())
        elif info.kind == PATH:
            raise SemanticError(f"{var} is a variable-length path; it has no properties")
        else:
            return None
        types = {d.fields[key] for d in defs if key in d.fields}
        if not types:
            where = f"label {info.label!r}" if info.label else "any label"
            raise SemanticError(f"unknown field {key!r} on {where} (variable {var})")
        return types.pop() if len(types) == 1 else None

    def bind(self, name: str, info: VarInfo) -> None:
        if name in self.scope and not name.startswith(" "):
            raise SemanticError(f"variable {name!r} is already bound")
        self.scope[name] = info

    # -- expressions ----------------------------------------------------------

    def check_expr(self, e: Any, allow_aggregates: bool = False) -> Any:
        """Validate names and types; returns the expression with defaults filled in."""
        if isinstance(e, A.Literal):
            return e
        if isinstance(e, A.Param):
            if e.name not in self.params:
                raise ParameterError(f"parameter ${e.name} is not bound")
            return e
        if isinstance(e, A.Var):
            if e.name not in self.scope:
                raise SemanticError(f"variable {e.name!r} is not defined")
            return e
        if isinstance(e, A.Prop):
            sub = self.check_expr(e.subject)
            if isinstance(sub, A.Var):
                self.field_type(self.scope[sub.name], e.key, sub.name)
            return A.Prop(sub, e.key)
        if isinstance(e, A.ListLit):
            return A.ListLit(tuple(self.check_expr(x) for x in e.items), e.array)
        if isinstance(e, A.MapLit):
            return A.MapLit(tuple((k, self.check_expr(v)) for k, v in e.items))
        if isinstance(e, A.IsNull):
            return A.IsNull(self.check_expr(e.operand), e.negated)
        if isinstance(e, A.UnaryOp):
            return A.UnaryOp(e.op, self.check_expr(e.operand, allow_aggregates))
        if isinstance(e, A.BinOp):
            left = self.check_expr(e.left, allow_aggregates)
            right = self.check_expr(e.right, allow_aggregates)
            if e.op in ("=", "<>"):
                self.check_vector_pair(left, right)
                self.check_vector_pair(right, left)
            return A.BinOp(e.op, left, right)
        if isinstance(e, A.FuncCall):
            if e.name in AGGREGATES:
                if not allow_aggregates:
                    raise SemanticError(f"{e.name}() is only allowed in RETURN")
                if e.star:
                    return e
                if len(e.args) != 1 or any(contains_aggregate(a) for a in e.args):
                    raise SemanticError("count takes one non-aggregate argument or *")
                return A.FuncCall(e.name, (self.check_expr(e.args[0]),))
            if e.star:
                raise SemanticError(f"{e.name}(*) is not a function")
            if e.name in VECTOR_FUNCTIONS:
                return self.check_vector_fn(e)
            if e.name not in SCALAR_FUNCTIONS:
                raise SemanticError(f"unknown function {e.name}()")
            lo, hi, _ = SCALAR_FUNCTIONS[e.name]
            if not lo <= len(e.args) <= hi:
                raise SemanticError(f"{e.name}() takes {lo}..{hi} arguments, got {len(e.args)}")
            return A.FuncCall(e.name, tuple(self.check_expr(a) for a in e.args))
        raise SemanticError(f"unsupported expression {type(e).__name__}")

    def vector_field(self, e: Any) -> tuple[str, str, FieldType] | None:
        """``(var, field, type)`` when ``e`` reads a declared vector field."""
        if isinstance(e, A.Prop) and isinstance(e.subject, A.Var):
            info = self.scope.get(e.subject.name)
            if info is not None and info.kind in (VERTEX, EDGE):
                ft = self.field_type(info, e.key, e.subject.name)
                if ft is not None and ft.kind == "vector":
                    return e.subject.name, e.key, ft
        return None

    def check_vector_operand(self, other: Any, dim: int) -> None:
        if isinstance(other, A.ListLit):
            if not all(isinstance(x, A.Literal) and is_number(x.value) for x in other.items):
                return
            if len(other.items) != dim:
                raise SemanticError(f"vector literal has {len(other.items)} components, field expects {dim}")
        elif isinstance(other, A.Param):
            value = self.params.get(other.name)
            if value is not None:
                if not is_vector(value if not hasattr(value, "tolist") else value.tolist()):
                    raise ParameterError(f"parameter ${other.name} must be a list of numbers")
                if len(value) != dim:
                    raise ParameterError(f"parameter ${other.name} has {len(value)} components, "
                                         f"field expects {dim}")

    def check_vector_pair(self, a: Any, b: Any) -> None:
        vf = self.vector_field(a)
        if vf is not None:
            self.check_vector_operand(b, vf[2].dim)

    def check_vector_fn(self, e: A.FuncCall) -> A.FuncCall:
        if not 2 <= len(e.args) <= 3:
            raise SemanticError(f"{e.name}() takes two vectors and an optional metric")
        a, b = (self.check_expr(x) for x in e.args[:2])
        self.check_vector_pair(a, b)
        self.check_vector_pair(b, a)
        if len(e.args) == 3:
            m = e.args[2]
            if not isinstance(m, A.Literal) or not isinstance(m.value, str):
                raise SemanticError("metric must be a string literal")
            try:
                metric = check_metric(m.value)
            except ValueError as exc:
                raise SemanticError(str(exc)) from None
        else:
            metric = "cosine"
            for side in (a, b):
                binding = self.index_binding(side)
                if binding is not None:
                    metric = binding[1]
                    break
        return A.FuncCall(e.name, (a, b, A.Literal(metric)))

    def index_binding(self, e: Any) -> tuple[str, str] | None:
        """``(collection, metric)`` when ``e`` is ``n.f`` with a VECTOR index on n's label."""
        vf = self.vector_field(e)
        if vf is None:
            return None
        info = self.scope[vf[0]]
        if info.kind != VERTEX or info.label is None:
            return None
        binding = self.catalog.index_on(info.label, vf[1])
        if binding is None:
            return None
        return binding.name, self._metric_of(binding.name)

    def _metric_of(self, collection: str) -> str:
        return self.collection_metrics.get(collection, "cosine")

    collection_metrics: dict = {}

    # -- clauses --------------------------------------------------------------

    def plan(self, stmt: Any) -> P.PlanOp:
        if isinstance(stmt, A.CreateVectorIndex):
            return self.plan_create_index(stmt)
        if not isinstance(stmt, A.Query):
            raise SemanticError(f"cannot plan {type(stmt).__name__}")
        op: P.PlanOp | None = None
        for i, clause in enumerate(stmt.clauses):
            if isinstance(clause, A.MatchClause):
                op = self.plan_match(clause, op)
            elif isinstance(clause, A.CallClause):
                if i != 0:
                    raise SemanticError("CALL must be the first clause of a query")
                op = self.plan_call(clause)
            elif isinstance(clause, A.CreateClause):
                op = self.plan_create(clause, op or P.SingleRow())
        if stmt.ret is None:
            last = stmt.clauses[-1] if stmt.clauses else None
            if isinstance(last, A.CreateClause):
                return P.ProduceResults([], child=op)
            if isinstance(last, A.CallClause):
                return P.ProduceResults([c for c in op.columns if not c.startswith(" ")], child=op)
            raise SemanticError("query must end with RETURN")
        return self.plan_return(stmt.ret, op or P.SingleRow())

    def plan_match(self, clause: A.MatchClause, op: P.PlanOp | None) -> P.PlanOp:
        preds: list[Any] = []
        for path in clause.patterns:
            op = self.plan_path(path, op, preds)
        if clause.where is not None:
            preds.append(self.check_expr(clause.where))
        for pred in preds:
            op = P.Filter(pred, child=op)
        return op

    def plan_path(self, path: A.PathPattern, op: P.PlanOp | None, preds: list) -> P.PlanOp:
        first = path.nodes[0]
        var = first.var or self.anon()
        if var in self.scope:
            info = self.scope[var]
            if info.kind != VERTEX:
                raise SemanticError(f"{var!r} is not a vertex")
            if first.label is not None:
                self.vertex_label_id(first.label)
                preds.append(A.BinOp("=", A.FuncCall("label", (A.Var(var),)), A.Literal(first.label)))
        else:
            lid = self.vertex_label_id(first.label)
            self.scope[var] = VarInfo(VERTEX, first.label)
            op = P.VertexScan(var, first.label, lid, child=op)
        preds.extend(self.prop_preds(var, first.props))
        src = var
        for rel, node in zip(path.rels, path.nodes[1:]):
            elid = self.edge_label_id(rel.label)
            rvar = rel.var or self.anon()
            if rel.var is not None and rel.var in self.scope:
                raise SemanticError(f"relationship variable {rel.var!r} is already bound")
            self.scope[rvar] = VarInfo(PATH if rel.var_length else EDGE, rel.label)
            dst = node.var or self.anon()
            bound = dst in self.scope
            if bound and self.scope[dst].kind != VERTEX:
                raise SemanticError(f"{dst!r} is not a vertex")
            dlid = self.vertex_label_id(node.label)
            if not bound:
                self.scope[dst] = VarInfo(VERTEX, node.label)
            elif node.label is not None:
                preds.append(A.BinOp("=", A.FuncCall("label", (A.Var(dst),)), A.Literal(node.label)))
            cls = P.VarLengthExpand if rel.var_length else P.Expand
            kwargs = {"min_hops": rel.min_hops, "max_hops": rel.max_hops} if rel.var_length else {}
            op = cls(src, rvar, dst, rel.label, elid, rel.direction, None if bound else node.label,
                     None if bound else dlid, bound, child=op, **kwargs)
            if rel.props is not None:
                if rel.var_length:
                    raise SemanticError("property maps are not supported on variable-length relationships")
                preds.extend(self.prop_preds(rvar, rel.props))
            preds.extend(self.prop_preds(dst, node.props))
            src = dst
        return op

    def prop_preds(self, var: str, props: A.MapLit | None) -> list:
        if props is None:
            return []
        return [self.check_expr(A.BinOp("=", A.Prop(A.Var(var), k), v)) for k, v in props.items]

    def plan_call(self, clause: A.CallClause) -> P.PlanOp:
        proc = PROCEDURES.get(clause.procedure.lower())
        if proc is None:
            raise SemanticError(f"unknown procedure {clause.procedure!r}")
        if not proc.min_args <= len(clause.args) <= proc.max_args:
            raise SemanticError(f"{proc.name}() takes {proc.min_args}..{proc.max_args} arguments, "
                                f"got {len(clause.args)}")
        args = [self.check_expr(a) for a in clause.args]
        outputs = dict(proc.outputs)
        if clause.yields is None:
            yields = [(c, c) for c, _ in proc.outputs]
        else:
            yields = []
            for col, alias in clause.yields:
                if col not in outputs:
                    raise SemanticError(f"{proc.name}() does not yield {col!r}; "
                                        f"it yields {', '.join(outputs)}")
                yields.append((col, alias or col))
        for col, alias in yields:
            self.bind(alias, VarInfo(VERTEX if outputs[col] == "vertex" else VALUE))
        self.writes = self.writes or proc.writes
        op: P.PlanOp = P.CallProcedure(proc.name, args, yields, proc.writes)
        if clause.where is not None:
            op = P.Filter(self.check_expr(clause.where), child=op)
        return op

    def plan_create(self, clause: A.CreateClause, op: P.PlanOp) -> P.PlanOp:
        self.writes = True
        new_vars = []
        for path in clause.patterns:
            for node in path.nodes:
                if node.var is not None and node.var in self.scope:
                    if node.label is not None or node.props is not None:
                        raise SemanticError(f"{node.var!r} is already bound; CREATE cannot relabel it")
                    if self.scope[node.var].kind != VERTEX:
                        raise SemanticError(f"{node.var!r} is not a vertex")
                    continue
                if node.label is None:
                    raise SemanticError("CREATE needs a label for every new vertex")
                self.vertex_label_id(node.label)
                ldef = self.catalog.vertex_label(node.label)
                for k, v in (node.props.items if node.props else ()):
                    if k not in ldef.fields:
                        raise SemanticError(f"unknown field {k!r} on label {node.label!r}")
                    self.check_expr(v)
                    if ldef.fields[k].kind == "vector":
                        self.check_vector_operand(v, ldef.fields[k].dim)
                if node.var is not None:
                    self.scope[node.var] = VarInfo(VERTEX, node.label)
                    new_vars.append(node.var)
            for rel in path.rels:
                if rel.label is None:
                    raise SemanticError("CREATE needs a label for every new relationship")
                if rel.var_length or rel.direction == "both":
                    raise SemanticError("CREATE needs a single directed relationship")
                self.edge_label_id(rel.label)
                ldef = self.catalog.edge_label(rel.label)
                for k, v in (rel.props.items if rel.props else ()):
                    if k not in ldef.fields:
                        raise SemanticError(f"unknown field {k!r} on edge label {rel.label!r}")
                    self.check_expr(v)
                if rel.var is not None:
                    self.bind(rel.var, VarInfo(EDGE, rel.label))
                    new_vars.append(rel.var)
        return P.CreateGraph(clause.patterns, new_vars, child=op)

    def plan_create_index(self, stmt: A.CreateVectorIndex) -> P.PlanOp:
        self.writes = True
        opts = {}
        for k, v in stmt.options.items:
            if isinstance(v, A.Param):
                if v.name not in self.params:
                    raise ParameterError(f"parameter ${v.name} is not bound")
                opts[k.lower()] = self.params[v.name]
            elif isinstance(v, A.Literal):
                opts[k.lower()] = v.value
            else:
                raise SemanticError(f"option {k!r} must be a literal")
        unknown = set(opts) - {"dim", "metric", "m", "ef_construction", "ef_search", "seed"}
        if unknown:
            raise SemanticError(f"unknown index option(s): {', '.join(sorted(unknown))}")
        self.vertex_label_id(stmt.label)
        ldef = self.catalog.vertex_label(stmt.label)
        ftype = ldef.fields.get(stmt.field)
        dim = opts.get("dim")
        if ftype is None:
            if not isinstance(dim, int) or dim < 1:
                raise SemanticError(f"{stmt.label}.{stmt.field} does not exist; OPTIONS must give dim")
        else:
            if ftype.kind != "vector":
                raise SemanticError(f"{stmt.label}.{stmt.field} is {ftype}, not a vector field")
            if dim is not None and dim != ftype.dim:
                raise SemanticError(f"{stmt.label}.{stmt.field} has dimension {ftype.dim}, OPTIONS say {dim}")
            dim = ftype.dim
        try:
            metric = check_metric(opts.get("metric", "cosine"))
        except ValueError as exc:
            raise SemanticError(str(exc)) from None
        if stmt.name in self.collection_metrics:
            raise SemanticError(f"collection {stmt.name!r} already exists")
        hnsw = {k: opts[k] for k in ("m", "ef_construction", "ef_search", "seed") if k in opts}
        return P.ProduceResults([], child=P.CreateVectorIndexOp(
            stmt.name, stmt.label, stmt.field, dim, metric, hnsw, ftype is None))

    def plan_return(self, ret: A.ReturnClause, op: P.PlanOp) -> P.PlanOp:
        items: list[tuple[str, Any]] = []
        for item in ret.items:
            if isinstance(item.expr, A.Var) and item.expr.name == "*":
                names = [n for n in self.scope if not n.startswith(" ")]
                if not names:
                    raise SemanticError("RETURN * with no variables in scope")
                items.extend((n, A.Var(n)) for n in names)
                continue
            expr = self.check_expr(item.expr, allow_aggregates=True)
            items.append((item.alias or item.text, expr))
        names = [n for n, _ in items]
        if len(set(names)) != len(names):
            raise SemanticError("duplicate column name in RETURN; use AS to rename")
        aggregate = any(contains_aggregate(e) for _, e in items)
        by_text = {render(e): n for n, e in items}
        sort_keys: list[tuple[str, bool, str]] = []
        hidden: list[tuple[str, Any]] = []
        for i, s in enumerate(ret.order_by):
            if isinstance(s.expr, A.Var) and s.expr.name in names:
                sort_keys.append((s.expr.name, s.descending, s.text))
                continue
            if aggregate or ret.distinct:
                key = render(self.check_expr(s.expr, allow_aggregates=aggregate))
                if key not in by_text:
                    raise SemanticError(f"ORDER BY {s.text} must refer to a returned column here")
                sort_keys.append((by_text[key], s.descending, s.text))
                continue
            expr = self.check_expr(s.expr)
            col = by_text.get(render(expr))
            if col is None:
                col = f" sort{i}"
                hidden.append((col, expr))
            sort_keys.append((col, s.descending, s.text))
        if aggregate:
            keys, aggs = [], []
            for n, e in items:
                if isinstance(e, A.FuncCall) and e.name in AGGREGATES:
                    aggs.append((n, e))
                elif contains_aggregate(e):
                    raise SemanticError("aggregates must appear as bare count(...) items")
                else:
                    keys.append((n, e))
            op = P.Aggregate(keys, aggs, child=op)
            # restore the RETURN column order
            if names != op.columns:
                op = P.Project([(n, A.Var(n)) for n in names], child=op)
        else:
            op = P.Project(items + hidden, child=op)
        if ret.distinct:
            op = P.Distinct(child=op)
        if sort_keys:
            op = P.OrderBy(sort_keys, child=op)
        skip = self.check_count(ret.skip, "SKIP")
        limit = self.check_count(ret.limit, "LIMIT")
        if skip is not None or limit is not None:
            op = P.Limit(skip, limit, child=op)
        return P.ProduceResults(names, child=op)

    def check_count(self, e: Any, what: str) -> Any:
        if e is None:
            return None
        if isinstance(e, A.Literal):
            if not isinstance(e.value, int) or isinstance(e.value, bool) or e.value < 0:
                raise SemanticError(f"{what} needs a non-negative integer")
            return e
        if isinstance(e, A.Param):
            self.check_expr(e)
            v = self.params[e.name]
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ParameterError(f"{what} parameter ${e.name} must be a non-negative integer")
            return e
        raise SemanticError(f"{what} takes a literal or a parameter")


# -- rewrites -----------------------------------------------------------------

def _conjuncts(e: Any) -> list:
    if isinstance(e, A.BinOp) and e.op == "AND":
        return _conjuncts(e.left) + _conjuncts(e.right)
    return [e]


def _value_kind(v: Any) -> str | None:
    if isinstance(v, bool):
        return "bool"
    if is_number(v):
        return "number"
    if isinstance(v, str):
        return "text"
    return None


_FIELD_KIND = {"int": "number", "float": "number", "text": "text", "bool": "bool"}


def _pushable(pred: Any, var: str, label_def, params: dict) -> tuple[str, str, Any] | None:
    if not isinstance(pred, A.BinOp) or pred.op not in PUSHABLE_OPS:
        return None
    left, right, op = pred.left, pred.right, pred.op
    if not (isinstance(left, A.Prop) and isinstance(left.subject, A.Var) and left.subject.name == var):
        left, right, op = right, left, _FLIP[op]
    if not (isinstance(left, A.Prop) and isinstance(left.subject, A.Var) and left.subject.name == var):
        return None
    if isinstance(right, A.Literal):
        value = right.value
    elif isinstance(right, A.Param):
        value = params.get(right.name)
    else:
        return None
    ftype = label_def.fields.get(left.key)
    if ftype is None or ftype.kind not in _FIELD_KIND:
        return None
    kind = _value_kind(value)
    if kind is None or kind != _FIELD_KIND[ftype.kind]:
        return None
    if kind == "bool" and op not in ("=", "<>"):
        return None
    return left.key, op, right


def optimize(root: P.PlanOp, catalog: Catalog, params: dict, metrics: dict[str, str],
             ef_search: int | None = None) -> P.PlanOp:
    """Replace VertexScan+OrderBy+Limit by VertexVectorScan when the pattern matches exactly.

    Matches ``MATCH (n:L) [WHERE <conjuncts on n>] RETURN ... ORDER BY
    vector_distance(n.f, q) ASC LIMIT k`` (or ``vector_similarity`` DESC)
    where ``L.f`` has a VECTOR index of the same metric and every conjunct is
    a comparison of a scalar payload field with a literal or parameter.
    """
    ops = root.chain()
    if len(ops) < 5 or not isinstance(ops[0], P.VertexScan) or ops[0].child is not None:
        return root
    scan = ops[0]
    i = 1
    preds = []
    while isinstance(ops[i], P.Filter):
        preds.extend(_conjuncts(ops[i].predicate))
        i += 1
    project, order, limit, sink = (ops[i:i + 4] + [None] * 4)[:4]
    if not (isinstance(project, P.Project) and isinstance(order, P.OrderBy)
            and isinstance(limit, P.Limit) and isinstance(sink, P.ProduceResults)):
        return root
    if limit.limit is None or len(order.keys) != 1 or scan.label is None:
        return root
    col, desc, _ = order.keys[0]
    expr = dict(project.items).get(col)
    if not isinstance(expr, A.FuncCall) or expr.name not in ("vector_distance", "vector_similarity"):
        return root
    if desc != (expr.name == "vector_similarity"):
        return root
    a, b, metric = expr.args
    if not (isinstance(a, A.Prop) and isinstance(a.subject, A.Var) and a.subject.name == scan.var):
        a, b = b, a
    if not (isinstance(a, A.Prop) and isinstance(a.subject, A.Var) and a.subject.name == scan.var):
        return root
    if not isinstance(b, (A.Param, A.ListLit)) or (isinstance(b, A.ListLit) and
                                                  not all(isinstance(x, A.Literal) for x in b.items)):
        return root
    binding = catalog.index_on(scan.label, a.key)
    if binding is None or metrics.get(binding.name) != metric.value:
        return root
    ldef = catalog.vertex_label(scan.label)
    filters = []
    for pred in preds:
        pushed = _pushable(pred, scan.var, ldef, params)
        if pushed is None:
            return root
        filters.append(pushed)
    k = limit.limit if limit.skip is None else A.BinOp("+", limit.skip, limit.limit)
    vscan = P.VertexVectorScan(scan.var, scan.label, binding.name, b, k, metric.value,
                               filters, ef_search)
    project = P.Project(project.items, child=vscan)
    top: P.PlanOp = project
    if limit.skip is not None:
        top = P.Limit(limit.skip, None, child=project)
    return P.ProduceResults(sink.output, child=top)


def plan_statement(stmt: Any, catalog: Catalog, params: dict, metrics: dict[str, str],
                   optimize_plan: bool = True, ef_search: int | None = None) -> tuple[P.PlanOp, bool]:
    """Plan (and optionally rewrite) ``stmt``; returns ``(plan, writes)``."""
    planner = Planner(catalog, params)
    planner.collection_metrics = metrics
    root = planner.plan(stmt)
    if optimize_plan:
        root = optimize(root, catalog, params, metrics, ef_search)
    return root, planner.writes
