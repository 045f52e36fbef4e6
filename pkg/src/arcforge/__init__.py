"""Embeddable multi-modal database: property graph, vectors and analytics in one engine."""

from .database import Database
from .errors import (
    ArcError,
    EmptyGraph,
    ParameterError,
    QueryError,
    QueryRuntimeError,
    QuerySyntaxError,
    SemanticError,
    TypeMismatch,
    UnknownVertex,
)
from .model import EdgeKey, EdgeRef, VertexId
from .vector import Condition, HnswParams, Point

__all__ = ["ArcError", "Condition", "Database", "EdgeKey", "EdgeRef", "EmptyGraph", "HnswParams",
           "ParameterError", "Point", "QueryError", "QueryRuntimeError", "QuerySyntaxError",
           "SemanticError", "TypeMismatch", "UnknownVertex", "VertexId"]
__version__ = "0.1.0"
