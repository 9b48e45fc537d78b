"""Single-pass bounded-memory edge coloring for multigraph streams."""

from .audit import (
    LeftoverReport,
    MetricsCollector,
    RunMetrics,
    SpaceMeter,
    TraceRecorder,
    VerifyResult,
    assignment_structure_audit,
    color_budget_check,
    counter_trace,
    leftover_stats,
    offset_independence_check,
    oracle_min_greedy,
    saturated_index_audit,
    space_check,
    verify_proper,
)
from .model import (
    ColorFormatError,
    ColorId,
    Edge,
    EngineInvariantError,
    RunConfig,
    StreamInputError,
    decode_color,
    encode_color,
    normalize_delta,
    resolve_config,
)
from .pipeline import StreamColorer, run_baseline, run_stream
from .workload import (
    StreamFormatError,
    StreamHeader,
    gen_multigraph,
    order_stream,
    read_colored,
    read_stream,
    write_colored,
    write_stream,
)

__version__ = "0.1.0"

__all__ = [
    "ColorFormatError",
    "ColorId",
    "Edge",
    "EngineInvariantError",
    "LeftoverReport",
    "MetricsCollector",
    "RunConfig",
    "RunMetrics",
    "SpaceMeter",
    "StreamColorer",
    "StreamFormatError",
    "StreamHeader",
    "StreamInputError",
    "TraceRecorder",
    "VerifyResult",
    "__version__",
    "assignment_structure_audit",
    "color_budget_check",
    "counter_trace",
    "decode_color",
    "encode_color",
    "gen_multigraph",
    "leftover_stats",
    "normalize_delta",
    "offset_independence_check",
    "oracle_min_greedy",
    "order_stream",
    "read_colored",
    "read_stream",
    "resolve_config",
    "run_baseline",
    "run_stream",
    "saturated_index_audit",
    "space_check",
    "verify_proper",
    "write_colored",
    "write_stream",
]
