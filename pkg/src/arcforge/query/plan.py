"""Logical plan operators.

Plans are chains (each operator has at most one input); a ``VertexScan``
with an input is a nested-loop scan applied to every input row.  The chain
is split into pipelines at blocking operators by the executor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .expr import render

BLOCKING = ("OrderBy", "Aggregate", "CallProcedure")


@dataclass
class PlanOp:
    child: "PlanOp | None" = field(default=None, kw_only=True)

    @property
    def name(self) -> str:
        return type(self).__name__

    @property
    def columns(self) -> list[str]:
        return list(self.child.columns) if self.child is not None else []

    def args(self) -> str:
        return ""

    def describe(self) -> str:
        return f"{self.name}({self.args()})"

    def chain(self) -> list["PlanOp"]:
        """Operators from the source up to (and including) ``self``."""
        out = []
        op: PlanOp | None = self
        while op is not None:
            out.append(op)
            op = op.child
        return out[::-1]


def _visible(cols: list[str]) -> list[str]:
    return [c for c in cols if not c.startswith(" ")]


@dataclass
class SingleRow(PlanOp):
    """Source producing one empty row (CREATE or RETURN without MATCH)."""


@dataclass
class VertexScan(PlanOp):
    var: str
    label: str | None
    label_id: int | None

    @property
    def columns(self) -> list[str]:
        return super().columns + [self.var]

    def args(self) -> str:
        label = f":{self.label}" if self.label else ""
        return f"{self.var}{label}" + (" per input row" if self.child is not None else "")


@dataclass
class VertexVectorScan(PlanOp):
    var: str
    label: str
    collection: str
    query: Any
    k: Any
    metric: str
    filters: list = field(default_factory=list)   # [(field, op, expr)]
    ef: int | None = None
    score_column: str = " score"

    @property
    def columns(self) -> list[str]:
        return [self.var, self.score_column]

    def args(self) -> str:
        parts = [f"{self.var}:{self.label}", f"collection={self.collection}",
                 f"query={render(self.query)}", f"k={render(self.k)}", f"metric={self.metric}",
                 f"ef={self.ef if self.ef is not None else 'default'}"]
        if self.filters:
            parts.append("filter=[" + " AND ".join(f"{f} {op} {render(v)}" for f, op, v in self.filters) + "]")
        return ", ".join(parts)


@dataclass
class Expand(PlanOp):
    src: str
    rel: str
    dst: str
    edge_label: str | None
    edge_label_id: int | None
    direction: str
    dst_label: str | None
    dst_label_id: int | None
    dst_bound: bool = False

    @property
    def columns(self) -> list[str]:
        cols = super().columns + [self.rel]
        return cols if self.dst_bound else cols + [self.dst]

    def _hops(self) -> str:
        return ""

    def args(self) -> str:
        lab = f":{self.edge_label}" if self.edge_label else ""
        rel = f"[{self.rel.strip() if not self.rel.startswith(' ') else ''}{lab}{self._hops()}]"
        dst = self.dst if not self.dst.startswith(" ") else ""
        dlab = f":{self.dst_label}" if self.dst_label else ""
        left, right = {"out": ("-", "->"), "in": ("<-", "-"), "both": ("-", "-")}[self.direction]
        suffix = " (bound)" if self.dst_bound else ""
        return f"({self.src}){left}{rel}{right}({dst}{dlab}){suffix}"


@dataclass
class VarLengthExpand(Expand):
    min_hops: int = 1
    max_hops: int = 1

    def _hops(self) -> str:
        return f"*{self.min_hops}..{self.max_hops}"


@dataclass
class Filter(PlanOp):
    predicate: Any

    def args(self) -> str:
        return render(self.predicate)


@dataclass
class Project(PlanOp):
    items: list   # [(column, expr)]

    @property
    def columns(self) -> list[str]:
        return [c for c, _ in self.items]

    def args(self) -> str:
        shown = []
        for col, e in self.items:
            text = render(e)
            if col.startswith(" "):
                shown.append(f"sortkey {text}")
            else:
                shown.append(text if text == col else f"{text} AS {col}")
        return ", ".join(shown)


@dataclass
class Aggregate(PlanOp):
    keys: list   # [(column, expr)]
    aggs: list   # [(column, FuncCall)]

    @property
    def columns(self) -> list[str]:
        return [c for c, _ in self.keys] + [c for c, _ in self.aggs]

    def args(self) -> str:
        keys = ", ".join(render(e) for _, e in self.keys)
        aggs = ", ".join(render(e) for _, e in self.aggs)
        return f"keys=[{keys}], aggregates=[{aggs}]"


@dataclass
class Distinct(PlanOp):
    def args(self) -> str:
        return ", ".join(_visible(self.columns))


@dataclass
class OrderBy(PlanOp):
    keys: list   # [(column, descending, text)]

    def args(self) -> str:
        return ", ".join(f"{text} {'DESC' if desc else 'ASC'}" for _, desc, text in self.keys)


@dataclass
class Limit(PlanOp):
    skip: Any
    limit: Any

    def args(self) -> str:
        parts = []
        if self.skip is not None:
            parts.append(f"skip={render(self.skip)}")
        if self.limit is not None:
            parts.append(f"limit={render(self.limit)}")
        return ", ".join(parts)


@dataclass
class CallProcedure(PlanOp):
    procedure: str
    arguments: list
    yields: list   # [(output column, alias)]
    writes: bool = False

    @property
    def columns(self) -> list[str]:
        return [alias for _, alias in self.yields]

    def args(self) -> str:
        y = ", ".join(c if c == a else f"{c} AS {a}" for c, a in self.yields)
        return f"{self.procedure}({', '.join(render(a) for a in self.arguments)}) YIELD {y}"


@dataclass
class CreateGraph(PlanOp):
    patterns: tuple
    new_vars: list

    @property
    def columns(self) -> list[str]:
        base = super().columns
        return base + [v for v in self.new_vars if v not in base]

    def args(self) -> str:
        from .planner import render_pattern
        return ", ".join(render_pattern(p) for p in self.patterns)


@dataclass
class CreateVectorIndexOp(PlanOp):
    index: str
    label: str
    field_name: str
    dim: int
    metric: str
    hnsw: dict
    add_field: bool

    @property
    def columns(self) -> list[str]:
        return []

    def args(self) -> str:
        extra = "".join(f", {k}={v}" for k, v in sorted(self.hnsw.items()))
        return f"{self.index} ON {self.label}({self.field_name}), dim={self.dim}, metric={self.metric}{extra}"


@dataclass
class ProduceResults(PlanOp):
    output: list

    @property
    def columns(self) -> list[str]:
        return list(self.output)

    def args(self) -> str:
        return ", ".join(self.output)


def render_plan(root: PlanOp) -> str:
    """Deterministic indented tree, sink first."""
    lines = []
    depth = 0
    op: PlanOp | None = root
    while op is not None:
        lines.append("  " * depth + op.describe())
        op = op.child
        depth += 1
    return "\n".join(lines)


def pipelines(root: PlanOp) -> list[list[PlanOp]]:
    """Split the chain at blocking operators; each pipeline ends at a breaker or the sink."""
    out: list[list[PlanOp]] = [[]]
    for op in root.chain():
        if op.name in BLOCKING and out[-1]:
            out.append([])
        out[-1].append(op)
    return out
