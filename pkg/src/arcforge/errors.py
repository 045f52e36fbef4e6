"""Exception hierarchy.

Every error raised on purpose by the engine derives from :class:`ArcError`,
so embedding applications can catch one type.
"""

from __future__ import annotations


class ArcError(Exception):
    """Base class for all engine errors."""


# -- mem-engine ---------------------------------------------------------------


class UnknownVertex(ArcError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return Exception.__str__(self)


class UnknownField(ArcError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownLabel(ArcError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class TypeMismatch(ArcError, TypeError):
    pass


class DimensionMismatch(ArcError, ValueError):
    pass


class DuplicateVertex(ArcError, ValueError):
    pass


class SchemaError(ArcError, ValueError):
    pass


# -- wal-store ----------------------------------------------------------------


class IoError(ArcError, OSError):
    """An append or checkpoint write failed; in-memory state is unchanged."""


class CorruptCheckpoint(ArcError):
    pass


class CorruptLog(ArcError):
    pass


class PruneBeyondCheckpoint(ArcError, ValueError):
    pass


# -- vector-store -------------------------------------------------------------


class DuplicateCollection(ArcError, ValueError):
    pass


class UnknownCollection(ArcError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class BadDimension(ArcError, ValueError):
    pass


# -- query-engine -------------------------------------------------------------


class QueryError(ArcError):
    """Base for errors surfaced to query callers (CLI exit code 2)."""


class QuerySyntaxError(QueryError):
    """Parse failure carrying the position and the tokens that would have fit."""

    def __init__(self, message: str, offset: int, line: int, column: int,
                 expected: frozenset[str] | set[str] = frozenset()):
        self.offset = offset
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        text = f"{message} at line {line}, column {column} (offset {offset})"
        if self.expected:
            text += "; expected one of: " + ", ".join(sorted(self.expected))
        super().__init__(text)


class SemanticError(QueryError):
    pass


class QueryRuntimeError(QueryError):
    """Wraps a storage error raised while a plan was executing."""


class ParameterError(QueryError):
    pass


# -- analytics ----------------------------------------------------------------


class EmptyGraph(ArcError, ValueError):
    pass
