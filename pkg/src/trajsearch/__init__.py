"""Trajectory similarity search over POI sequences with inverted indexes."""

from .index import build_1p, build_2p, build_contextual
from .kernels import BACKEND
from .lcss import EXACT, MatchFn, baseline_search, lcss_length
from .model import (
    PoiId,
    QuerySpec,
    SearchMode,
    Trajectory,
    TrajectoryCorpus,
    position_of,
    required_common_pois,
)
from .search import SearchEngine, SearchResult, search_1p, search_2p, search_baseline, search_contextual

__all__ = [
    "BACKEND",
    "EXACT",
    "MatchFn",
    "PoiId",
    "QuerySpec",
    "SearchEngine",
    "SearchMode",
    "SearchResult",
    "Trajectory",
    "TrajectoryCorpus",
    "baseline_search",
    "build_1p",
    "build_2p",
    "build_contextual",
    "lcss_length",
    "position_of",
    "required_common_pois",
    "search_1p",
    "search_2p",
    "search_baseline",
    "search_contextual",
]

__version__ = "0.1.0"
