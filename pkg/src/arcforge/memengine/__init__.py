"""In-memory graph topology, adaptive edge collections and the attribute cache."""

from .cache import AttributeCache, AttributeStore
from .edges import DEFAULT_THRESHOLD, AdaptiveEdgeCollection
from .engine import MemEngine
from .topology import IN, OUT, FootprintReport, GraphTopology

__all__ = ["AdaptiveEdgeCollection", "AttributeCache", "AttributeStore", "DEFAULT_THRESHOLD",
           "FootprintReport", "GraphTopology", "IN", "MemEngine", "OUT"]
