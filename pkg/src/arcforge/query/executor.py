"""Push-based, batch-at-a-time execution of logical plans.

Each physical operator receives :class:`RowBatch` objects through ``push``
and forwards results downstream; ``finish`` flushes blocking operators.
A ``Limit`` that has seen enough rows marks itself done, and every operator
upstream of it checks ``done`` between batches, so sources stop producing
as soon as the sink is satisfied.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from ..errors import ArcError, ParameterError, QueryError, QueryRuntimeError
from ..memengine.topology import IN, OUT
from ..model import EdgeRef, VertexId, canonical
from ..vector.payload import Condition
from . import ast as A
from . import plan as P
from .expr import compile_expr, truthy
from .procedures import PROCEDURES

DEFAULT_BATCH_SIZE = 1024


class RowBatch:
    """Columnar batch: ``columns[i]`` holds the values of ``names[i]``."""

    __slots__ = ("names", "columns", "length", "_index")

    def __init__(self, names: list[str], columns: list[list], length: int | None = None):
        self.names = names
        self.columns = columns
        self.length = len(columns[0]) if columns else (length or 0)
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self) -> int:
        return self.length

    def column(self, name: str) -> list:
        try:
            return self.columns[self._index[name]]
        except KeyError:
            raise QueryRuntimeError(f"column {name!r} is not available") from None

    def select(self, mask: list[bool]) -> "RowBatch":
        if all(mask):
            return self
        return RowBatch(self.names, [list(itertools.compress(c, mask)) for c in self.columns],
                        sum(mask))

    def rows(self) -> Iterator[tuple]:
        if not self.columns:
            return iter([()] * self.length)
        return zip(*self.columns)


@dataclass
class ExecContext:
    db: Any
    params: dict
    batch_size: int = DEFAULT_BATCH_SIZE
    ef_search: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.catalog = self.db.catalog
        self.engine = self.db.engine

    def param(self, name: str) -> Any:
        try:
            return self.params[name]
        except KeyError:
            raise ParameterError(f"parameter ${name} is not bound") from None

    def constant(self, expr: Any) -> Any:
        """Evaluate a row-independent expression."""
        return compile_expr(expr)(RowBatch([], [], 1), self)[0]


# -- operators ----------------------------------------------------------------

class Operator:
    def __init__(self, logical: P.PlanOp, downstream: "Operator | None", ctx: ExecContext):
        self.logical = logical
        self.downstream = downstream
        self.ctx = ctx
        self.rows_in = 0
        self.rows_out = 0

    @property
    def done(self) -> bool:
        return self.downstream is not None and self.downstream.done

    def emit(self, batch: RowBatch) -> None:
        down = self.downstream
        if len(batch) == 0 or down.done:
            return
        size = self.ctx.batch_size
        if len(batch) <= size:
            self.rows_out += len(batch)
            self.downstream.push(batch)
            return
        for start in range(0, len(batch), size):
            if down.done:
                return
            part = RowBatch(batch.names, [c[start:start + size] for c in batch.columns],
                            min(size, len(batch) - start))
            self.rows_out += len(part)
            self.downstream.push(part)

    def push(self, batch: RowBatch) -> None:
        self.rows_in += len(batch)
        self.process(batch)

    def process(self, batch: RowBatch) -> None:
        raise NotImplementedError

    def finish(self) -> None:
        if self.downstream is not None:
            self.downstream.finish()

    def counters(self) -> dict:
        return {"operator": self.logical.name, "rows_in": self.rows_in, "rows_out": self.rows_out}


class RowBuilder:
    """Accumulates output rows and flushes full batches downstream."""

    def __init__(self, op: Operator, names: list[str]):
        self.op = op
        self.names = names
        self.cols: list[list] = [[] for _ in names]
        self.count = 0

    def add(self, row: Iterable[Any]) -> bool:
        """Append a row; returns False once downstream needs no more rows."""
        for col, v in zip(self.cols, row):
            col.append(v)
        self.count += 1
        if self.count >= self.op.ctx.batch_size:
            self.flush()
            return not self.op.done
        return True

    def flush(self) -> None:
        if self.count:
            batch = RowBatch(self.names, self.cols, self.count)
            self.cols = [[] for _ in self.names]
            self.count = 0
            self.op.emit(batch)


class Source(Operator):
    def run(self) -> None:
        raise NotImplementedError


class SingleRowOp(Source):
    def run(self) -> None:
        self.emit(RowBatch([], [], 1))


def _scan_ids(ctx: ExecContext, label_id: int | None) -> list[VertexId]:
    engine = ctx.engine
    if label_id is not None:
        return list(engine.scan(label_id))
    out = []
    for lid in sorted(d.id for d in ctx.catalog.vertex_labels.values()):
        out.extend(engine.scan(lid))
    return out


class VertexScanOp(Source):
    """Label scan; with an input it is applied to every input row."""

    def __init__(self, logical, downstream, ctx, partition: tuple[int, int] | None = None,
                 ids: list[VertexId] | None = None):
        super().__init__(logical, downstream, ctx)
        self.partition = partition
        self._ids = ids

    def ids(self) -> list[VertexId]:
        if self._ids is None:
            self._ids = _scan_ids(self.ctx, self.logical.label_id)
        return self._ids

    def run(self) -> None:
        ids = self.ids()
        if self.partition is not None:
            ids = ids[self.partition[0]:self.partition[1]]
        size = self.ctx.batch_size
        names = [self.logical.var]
        for start in range(0, len(ids), size):
            if self.done:
                return
            self.emit(RowBatch(names, [ids[start:start + size]]))

    def process(self, batch: RowBatch) -> None:
        ids = self.ids()
        out = RowBuilder(self, batch.names + [self.logical.var])
        for row in batch.rows():
            for v in ids:
                if not out.add(row + (v,)):
                    return
        out.flush()


class VertexVectorScanOp(Source):
    def run(self) -> None:
        lg: P.VertexVectorScan = self.logical
        ctx = self.ctx
        k = ctx.constant(lg.k)
        if not isinstance(k, int) or isinstance(k, bool) or k < 0:
            raise ParameterError(f"LIMIT must be a non-negative integer, got {k!r}")
        if k == 0:
            return
        query = ctx.constant(lg.query)
        conds = [Condition(f, op, ctx.constant(v)) for f, op, v in lg.filters]
        coll = ctx.db.collection(lg.collection)
        ef = lg.ef if lg.ef is not None else ctx.ef_search
        try:
            hits = coll.search(query, k, ef, conds or None)
        except ArcError as exc:
            if isinstance(lg.query, A.Param):
                raise ParameterError(f"${lg.query.name}: {exc}") from exc
            raise
        self.emit(RowBatch([lg.var, lg.score_column], [[h.key for h in hits], [h.score for h in hits]]))


class ExpandOp(Operator):
    def _neighbors(self, v: VertexId) -> Iterator[tuple[EdgeRef, VertexId]]:
        lg: P.Expand = self.logical
        topo = self.ctx.engine.topology
        if lg.direction in ("out", "both"):
            for lab, (nl, nid, eid) in topo.entries(v, OUT, lg.edge_label_id):
                nbr = VertexId(nl, nid)
                yield EdgeRef(v, lab, nbr, eid), nbr
        if lg.direction in ("in", "both"):
            for lab, (nl, nid, eid) in topo.entries(v, IN, lg.edge_label_id):
                nbr = VertexId(nl, nid)
                if lg.direction == "both" and nbr == v:
                    continue  # a self loop was already produced by the outgoing pass
                yield EdgeRef(nbr, lab, v, eid), nbr

    def _targets(self, v: VertexId) -> Iterator[tuple[Any, VertexId]]:
        return self._neighbors(v)

    def process(self, batch: RowBatch) -> None:
        lg: P.Expand = self.logical
        src_col = batch.column(lg.src)
        dst_col = batch.column(lg.dst) if lg.dst_bound else None
        names = batch.names + ([lg.rel] if lg.dst_bound else [lg.rel, lg.dst])
        want = lg.dst_label_id
        out = RowBuilder(self, names)
        for i, row in enumerate(batch.rows()):
            src = src_col[i]
            if src is None:
                continue
            for rel, nbr in self._targets(src):
                if want is not None and nbr.label_id != want:
                    continue
                if dst_col is not None:
                    if nbr != dst_col[i]:
                        continue
                    ok = out.add(row + (rel,))
                else:
                    ok = out.add(row + (rel, nbr))
                if not ok:
                    return
        out.flush()


class VarLengthExpandOp(ExpandOp):
    """One output row per walk with min..max hops (edges may repeat)."""

    def _targets(self, v: VertexId) -> Iterator[tuple[Any, VertexId]]:
        lg: P.VarLengthExpand = self.logical
        lo, hi = lg.min_hops, lg.max_hops
        stack = [(v, (), self._neighbors(v))]
        while stack:
            node, path, it = stack[-1]
            step = next(it, None)
            if step is None:
                stack.pop()
                continue
            rel, nbr = step
            walk = path + (rel,)
            if len(walk) >= lo:
                yield walk, nbr
            if len(walk) < hi:
                stack.append((nbr, walk, self._neighbors(nbr)))


class FilterOp(Operator):
    def __init__(self, logical, downstream, ctx):
        super().__init__(logical, downstream, ctx)
        self.fn = compile_expr(logical.predicate)

    def process(self, batch: RowBatch) -> None:
        self.emit(batch.select(truthy(self.fn(batch, self.ctx))))


class ProjectOp(Operator):
    def __init__(self, logical, downstream, ctx):
        super().__init__(logical, downstream, ctx)
        self.names = [n for n, _ in logical.items]
        self.fns = [compile_expr(e) for _, e in logical.items]

    def process(self, batch: RowBatch) -> None:
        self.emit(RowBatch(self.names, [fn(batch, self.ctx) for fn in self.fns], len(batch)))


class AggregateOp(Operator):
    def __init__(self, logical, downstream, ctx):
        super().__init__(logical, downstream, ctx)
        self.key_fns = [compile_expr(e) for _, e in logical.keys]
        self.agg_fns = [None if e.star else compile_expr(e.args[0]) for _, e in logical.aggs]
        self.groups: dict[tuple, list] = {}

    def process(self, batch: RowBatch) -> None:
        keys = [fn(batch, self.ctx) for fn in self.key_fns]
        vals = [fn(batch, self.ctx) if fn is not None else None for fn in self.agg_fns]
        for i in range(len(batch)):
            kv = tuple(k[i] for k in keys)
            ck = tuple(canonical(x) for x in kv)
            entry = self.groups.get(ck)
            if entry is None:
                entry = self.groups[ck] = [kv, [0] * len(self.agg_fns)]
            for j, col in enumerate(vals):
                if col is None or col[i] is not None:
                    entry[1][j] += 1

    def finish(self) -> None:
        if not self.groups and not self.key_fns:
            self.groups[()] = [(), [0] * len(self.agg_fns)]
        names = self.logical.columns
        out = RowBuilder(self, names)
        for kv, counts in self.groups.values():
            if not out.add(kv + tuple(counts)):
                break
        out.flush()
        super().finish()


class DistinctOp(Operator):
    def __init__(self, logical, downstream, ctx):
        super().__init__(logical, downstream, ctx)
        self.seen: set = set()

    def process(self, batch: RowBatch) -> None:
        mask = []
        for row in batch.rows():
            key = tuple(canonical(v) for v in row)
            mask.append(key not in self.seen)
            self.seen.add(key)
        self.emit(batch.select(mask))


def _sort_key(v: Any) -> tuple:
    if v is None:
        return (9,)
    if isinstance(v, bool):
        return (1, v)
    if isinstance(v, (int, float)):
        return (2, v)
    if isinstance(v, str):
        return (3, v)
    if isinstance(v, VertexId):
        return (4, tuple(v))
    if isinstance(v, EdgeRef):
        return (5, (tuple(v.src), v.edge_label_id, tuple(v.dst), v.edge_id))
    raise QueryRuntimeError(f"cannot order values of type {type(v).__name__}")


class OrderByOp(Operator):
    def __init__(self, logical, downstream, ctx):
        super().__init__(logical, downstream, ctx)
        self.rows: list[tuple] = []
        self.names: list[str] | None = None

    def process(self, batch: RowBatch) -> None:
        self.names = batch.names
        self.rows.extend(batch.rows())

    def finish(self) -> None:
        if self.names is not None:
            rows = self.rows
            # stable sorts from the last key to the first give a lexicographic order
            for col, desc, _ in reversed(self.logical.keys):
                idx = self.names.index(col)
                rows.sort(key=lambda r: _sort_key(r[idx]), reverse=desc)
            out = RowBuilder(self, self.names)
            for row in rows:
                if not out.add(row):
                    break
            out.flush()
        super().finish()


class LimitOp(Operator):
    def __init__(self, logical, downstream, ctx):
        super().__init__(logical, downstream, ctx)
        self.skip = self._count(logical.skip, "SKIP")
        self.limit = self._count(logical.limit, "LIMIT")
        self.passed = 0

    def _count(self, expr: Any, what: str) -> int | None:
        if expr is None:
            return None
        v = self.ctx.constant(expr)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ParameterError(f"{what} must be a non-negative integer, got {v!r}")
        return v

    @property
    def done(self) -> bool:
        return (self.limit is not None and self.passed >= self.limit) or super().done

    def process(self, batch: RowBatch) -> None:
        start = 0
        if self.skip:
            start = min(self.skip, len(batch))
            self.skip -= start
        end = len(batch)
        if self.limit is not None:
            end = min(end, start + self.limit - self.passed)
        if end <= start:
            return
        self.passed += end - start
        if start == 0 and end == len(batch):
            self.emit(batch)
        else:
            self.emit(RowBatch(batch.names, [c[start:end] for c in batch.columns], end - start))


class CallProcedureOp(Source):
    def run(self) -> None:
        lg: P.CallProcedure = self.logical
        proc = PROCEDURES[lg.procedure]
        args = [self.ctx.constant(a) for a in lg.arguments]
        rows = proc.run(self.ctx.db, args)
        positions = [c for c, _ in proc.outputs]
        idx = [positions.index(c) for c, _ in lg.yields]
        names = [a for _, a in lg.yields]
        cols = [[r[i] for r in rows] for i in idx]
        self.emit(RowBatch(names, cols, len(rows)))


class CreateGraphOp(Operator):
    def __init__(self, logical, downstream, ctx):
        super().__init__(logical, downstream, ctx)
        self.vertices_created = 0
        self.edges_created = 0

    def process(self, batch: RowBatch) -> None:
        lg: P.CreateGraph = self.logical
        db = self.ctx.db
        names = lg.columns
        new_names = names[len(batch.names):]
        prop_fns = {}
        for p_i, path in enumerate(lg.patterns):
            for n_i, node in enumerate(path.nodes):
                if node.props is not None:
                    prop_fns[("n", p_i, n_i)] = compile_expr(node.props)(batch, self.ctx)
            for r_i, rel in enumerate(path.rels):
                if rel.props is not None:
                    prop_fns[("r", p_i, r_i)] = compile_expr(rel.props)(batch, self.ctx)
        out_cols: list[list] = [[] for _ in new_names]
        for i, row in enumerate(batch.rows()):
            env = dict(zip(batch.names, row))
            for p_i, path in enumerate(lg.patterns):
                ends = []
                for n_i, node in enumerate(path.nodes):
                    if node.var is not None and node.var in env:
                        ends.append(env[node.var])
                        continue
                    props = prop_fns.get(("n", p_i, n_i), [None] * len(batch))[i] or {}
                    v = db.create_vertex(node.label, props)
                    self.vertices_created += 1
                    if node.var is not None:
                        env[node.var] = v
                    ends.append(v)
                for r_i, rel in enumerate(path.rels):
                    a, b = ends[r_i], ends[r_i + 1]
                    if rel.direction == "in":
                        a, b = b, a
                    props = prop_fns.get(("r", p_i, r_i), [None] * len(batch))[i] or {}
                    ref = db.create_edge(a, rel.label, b, props)
                    self.edges_created += 1
                    if rel.var is not None:
                        env[rel.var] = ref
            for col, name in zip(out_cols, new_names):
                col.append(env[name])
        self.emit(RowBatch(names, batch.columns + out_cols, len(batch)))

    def counters(self) -> dict:
        d = super().counters()
        d.update(vertices_created=self.vertices_created, edges_created=self.edges_created)
        return d


class CreateVectorIndexExec(Source):
    def run(self) -> None:
        lg: P.CreateVectorIndexOp = self.logical
        db = self.ctx.db
        if lg.add_field:
            db.add_field(lg.label, lg.field_name, f"vector({lg.dim})")
        db.create_vector_index(lg.index, lg.label, lg.field_name, lg.metric, lg.hnsw or None)


class Sink(Operator):
    def __init__(self, logical, ctx):
        super().__init__(logical, None, ctx)
        self.rows: list[tuple] = []

    def process(self, batch: RowBatch) -> None:
        idx = [batch.names.index(c) for c in self.logical.output]
        for row in batch.rows():
            self.rows.append(tuple(row[i] for i in idx))
        self.rows_out = len(self.rows)


class Buffer(Operator):
    """Pipeline-partition terminal: keeps batches until partitions are merged."""

    def __init__(self, logical, ctx):
        super().__init__(logical, None, ctx)
        self.batches: list[RowBatch] = []

    def process(self, batch: RowBatch) -> None:
        self.batches.append(batch)


_OPERATORS = {
    "Filter": FilterOp, "Project": ProjectOp, "Aggregate": AggregateOp, "Distinct": DistinctOp,
    "OrderBy": OrderByOp, "Limit": LimitOp, "Expand": ExpandOp, "VarLengthExpand": VarLengthExpandOp,
    "VertexScan": VertexScanOp, "CreateGraph": CreateGraphOp,
}
_SOURCES = {
    "SingleRow": SingleRowOp, "VertexScan": VertexScanOp, "VertexVectorScan": VertexVectorScanOp,
    "CallProcedure": CallProcedureOp, "CreateVectorIndexOp": CreateVectorIndexExec,
}
_PARALLEL_SAFE = ("Filter", "Project", "Expand", "VarLengthExpand", "VertexScan")


# -- driver -------------------------------------------------------------------

@dataclass
class ExecutionStats:
    counters: list[dict] = field(default_factory=list)
    pipelines: int = 1
    partitions: int = 1


def _build(chain: list[P.PlanOp], terminal: Operator, ctx: ExecContext, **source_kw) -> list[Operator]:
    """Instantiate ``chain`` (source first) feeding ``terminal``; returns source-first ops."""
    ops: list[Operator] = [terminal]
    down = terminal
    for lg in reversed(chain[1:]):
        down = _OPERATORS[lg.name](lg, down, ctx)
        ops.append(down)
    src = _SOURCES[chain[0].name](chain[0], down, ctx, **source_kw) if chain[0].name == "VertexScan" \
        else _SOURCES[chain[0].name](chain[0], down, ctx)
    ops.append(src)
    return ops[::-1]


def execute(root: P.PlanOp, ctx: ExecContext, workers: int = 1) -> tuple[list[tuple], ExecutionStats]:
    chain = root.chain()
    if not isinstance(root, P.ProduceResults):
        raise QueryRuntimeError("plan has no sink")
    body = chain[:-1]
    sink = Sink(root, ctx)
    stats = ExecutionStats(pipelines=len(P.pipelines(root)))
    try:
        # the first pipeline may fan out over partitions of the scan's key range
        first_break = next((i for i, op in enumerate(body) if i > 0 and op.name in P.BLOCKING), len(body))
        head = body[:first_break]
        parallel = (workers > 1 and head and isinstance(head[0], P.VertexScan) and head[0].child is None
                    and all(op.name in _PARALLEL_SAFE for op in head[1:]))
        if not parallel:
            ops = _build(body, sink, ctx)
            ops[0].run()
            ops[0].finish()
            stats.counters = [op.counters() for op in ops]
            return sink.rows, stats
        rest = body[first_break:]
        if rest:
            rest_ops = _build([P.SingleRow()] + rest, sink, ctx)[1:]
            merge_into = rest_ops[0]
        else:
            rest_ops = [sink]
            merge_into = sink
        ids = _scan_ids(ctx, head[0].label_id)
        step = -(-len(ids) // workers) or 1
        parts = [(s, min(s + step, len(ids))) for s in range(0, max(len(ids), 1), step)]
        chains = [_build(head, Buffer(head[-1], ctx), ctx, partition=p, ids=ids) for p in parts]
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="arcforge-exec") as pool:
            list(pool.map(lambda ops: ops[0].run(), chains))
        for ops in chains:
            for batch in ops[-1].batches:
                merge_into.push(batch)
        merge_into.finish()
        merged = []
        for pos in range(len(head)):
            d = {"operator": head[pos].name,
                 "rows_in": sum(c[pos].rows_in for c in chains),
                 "rows_out": sum(c[pos].rows_out for c in chains)}
            merged.append(d)
        stats.counters = merged + [op.counters() for op in rest_ops]
        stats.partitions = len(parts)
        return sink.rows, stats
    except QueryError:
        raise
    except ArcError as exc:
        raise QueryRuntimeError(f"{type(exc).__name__}: {exc}") from exc


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, (time.perf_counter() - t0) * 1000.0
