"""Local vector storage: HNSW graphs inside segmented, filterable collections."""

from .collection import HnswParams, Point, ScoredHit, VectorCollection
from .distance import distance, score
from .hnsw import HNSWIndex
from .payload import Condition, PayloadIndex

__all__ = ["Condition", "HNSWIndex", "HnswParams", "PayloadIndex", "Point", "ScoredHit",
           "VectorCollection", "distance", "score"]
