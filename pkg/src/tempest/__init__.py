"""Temporal motif mining: query compiler, DFS search kernel, work-stealing runtime."""
from .graph import TemporalGraph, attach_vertex_labels, load_edge_list, save_binary
from .query import MotifQuery, parse_query, validate_query
from .plan import compile_plan
from .runtime import SchedulerConfig, run_query

__version__ = "0.1.0"

__all__ = [
    "TemporalGraph", "MotifQuery", "SchedulerConfig", "attach_vertex_labels", "compile_plan", "load_edge_list",
    "parse_query", "run_query", "save_binary", "validate_query",
]
