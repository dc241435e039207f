"""mpbench: message-passing micro-benchmarks over a simulated transport.

Point-to-point, blocking-collective, vector-collective, and data-parallel ML
benchmarks run against a deterministic in-process transport whose message
costs follow an alpha-beta model, so every reported number is reproducible
and checkable against analytic oracles. An optional mpi4py adapter runs the
same drivers under a real MPI launcher with wall-clock timing.
"""

from .benches import (
    BenchReport,
    run_bandwidth,
    run_benchmark,
    run_bibw,
    run_collective,
    run_latency,
    run_mult_lat,
)
from .collectives import ReduceOp, VectorLayout
from .core import (
    ALL_BENCHMARKS,
    BenchConfig,
    BenchRecord,
    MessageSizeSweep,
    SampleStats,
    bandwidth_mbps,
    summarize,
    sweep_sizes,
)
from .errors import (
    ConfigError,
    CorruptionError,
    DeadlockError,
    MeasurementError,
    RankFailedError,
)
from .mlbench import Dataset, SpeedupResult, run_ml_benchmark
from .transport import ChannelModel, RankContext, spawn_world

__version__ = "0.1.0"

__all__ = [
    "ALL_BENCHMARKS",
    "BenchConfig",
    "BenchRecord",
    "BenchReport",
    "ChannelModel",
    "ConfigError",
    "CorruptionError",
    "Dataset",
    "DeadlockError",
    "MeasurementError",
    "MessageSizeSweep",
    "RankContext",
    "RankFailedError",
    "ReduceOp",
    "SampleStats",
    "SpeedupResult",
    "VectorLayout",
    "bandwidth_mbps",
    "run_bandwidth",
    "run_benchmark",
    "run_bibw",
    "run_collective",
    "run_latency",
    "run_ml_benchmark",
    "run_mult_lat",
    "spawn_world",
    "summarize",
    "sweep_sizes",
    "__version__",
]
