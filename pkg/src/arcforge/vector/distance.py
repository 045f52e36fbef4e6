"""Reference (scalar-semantics) distance and similarity functions."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionMismatch

METRICS = ("cosine", "euclidean", "dot")
METRIC_CODES = {"cosine": 0, "euclidean": 1, "dot": 2}


def check_metric(metric: str) -> str:
    metric = str(metric).lower()
    aliases = {"l2": "euclidean", "euclid": "euclidean", "ip": "dot", "inner": "dot", "cos": "cosine"}
    metric = aliases.get(metric, metric)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return metric


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def distance(metric: str, a, b) -> float:
    """Raw metric value: cosine similarity, Euclidean distance, or dot product.

    A zero-norm operand gives cosine similarity 0.
    """
    metric = check_metric(metric)
    a, b = _pair(a, b)
    if metric == "euclidean":
        return float(math.sqrt(float(np.sum((a - b) ** 2))))
    dot = float(np.dot(a, b))
    if metric == "dot":
        return dot
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def score(metric: str, a, b) -> float:
    """Similarity score: higher is closer (Euclidean scores are negated distances)."""
    value = distance(metric, a, b)
    return -value if check_metric(metric) == "euclidean" else value


def scores_many(metric: str, matrix: np.ndarray, query) -> np.ndarray:
    """Vectorised :func:`score` of every row of ``matrix`` against ``query`` (float64)."""
    metric = check_metric(metric)
    m = np.asarray(matrix, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64).ravel()
    if m.ndim != 2 or m.shape[1] != q.shape[0]:
        raise DimensionMismatch(f"dimension mismatch: {m.shape} vs {q.shape[0]}")
    if metric == "euclidean":
        return -np.sqrt(np.sum((m - q) ** 2, axis=1))
    dots = m @ q
    if metric == "dot":
        return dots
    norms = np.sqrt(np.einsum("ij,ij->i", m, m)) * math.sqrt(float(q @ q))
    out = np.zeros(len(m))
    nz = norms > 0
    out[nz] = dots[nz] / norms[nz]
    return out


def to_distance_value(metric: str, score_value: float) -> float:
    """The ``vector_distance`` form of a score: ascending distance == descending score."""
    metric = check_metric(metric)
    if metric == "cosine":
        return 1.0 - score_value
    return -score_value


def norm(v) -> float:
    v = np.asarray(v, dtype=np.float64).ravel()
    return float(math.sqrt(float(np.dot(v, v))))
