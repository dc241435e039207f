"""Shared domain types: benchmark configuration, size sweeps, statistics.

Bandwidth uses decimal megabytes (MB = 10^6 bytes), so MB/s is numerically
identical to bytes per microsecond.
"""

from dataclasses import dataclass, field
from math import fsum, isfinite

from .errors import ConfigError, MeasurementError
from .transport import ChannelModel

__all__ = [
    "POINT_TO_POINT",
    "COLLECTIVES",
    "VECTOR_COLLECTIVES",
    "ML_BENCHMARKS",
    "ALL_BENCHMARKS",
    "LATENCY_US",
    "BANDWIDTH_MBPS",
    "MessageSizeSweep",
    "BenchConfig",
    "SampleStats",
    "BenchRecord",
    "sweep_sizes",
    "summarize",
    "bandwidth_mbps",
]

POINT_TO_POINT = ("latency", "bw", "bibw", "mult_lat")
COLLECTIVES = (
    "allgather",
    "allreduce",
    "alltoall",
    "barrier",
    "bcast",
    "gather",
    "reduce_scatter",
    "reduce",
    "scatter",
)
VECTOR_COLLECTIVES = ("allgatherv", "alltoallv", "gatherv", "scatterv")
ML_BENCHMARKS = ("knn", "kmeans_sweep", "matmul")
ALL_BENCHMARKS = POINT_TO_POINT + COLLECTIVES + VECTOR_COLLECTIVES + ML_BENCHMARKS

LATENCY_US = "latency_us"
BANDWIDTH_MBPS = "bandwidth_mbps"

BUFFER_MODES = ("direct", "serialized")


@dataclass(frozen=True)
class MessageSizeSweep:
    """Inclusive byte-size range swept by doubling from ``lower_limit``."""

    lower_limit: int
    upper_limit: int

    def __post_init__(self):
        if self.lower_limit < 1:
            raise ConfigError(f"lower_limit must be >= 1, got {self.lower_limit}")
        if self.upper_limit < self.lower_limit:
            raise ConfigError(
                f"upper_limit {self.upper_limit} < lower_limit {self.lower_limit}"
            )


def sweep_sizes(sweep: MessageSizeSweep) -> list[int]:
    """All sizes ``lower_limit * 2**k`` up to ``upper_limit``, ascending."""
    sizes = []
    size = sweep.lower_limit
    while size <= sweep.upper_limit:
        sizes.append(size)
        size *= 2
    return sizes


@dataclass(frozen=True)
class BenchConfig:
    """Everything one benchmark invocation needs."""

    benchmark: str
    np: int = 2
    iterations: int = 1000
    warmup: int = 100
    sweep: MessageSizeSweep = field(default_factory=lambda: MessageSizeSweep(1, 2**20))
    buffer_mode: str = "direct"
    channel: ChannelModel = field(default_factory=ChannelModel)
    seed: int = 0
    window_size: int = 64  # bw/bibw streaming window
    flop_cost: float = 0.001  # simulated microseconds per flop (ML benches)

    def __post_init__(self):
        if self.benchmark not in ALL_BENCHMARKS:
            raise ConfigError(
                f"unknown benchmark {self.benchmark!r}; valid: {', '.join(ALL_BENCHMARKS)}"
            )
        if self.buffer_mode not in BUFFER_MODES:
            raise ConfigError(
                f"buffer_mode must be one of {BUFFER_MODES}, got {self.buffer_mode!r}"
            )
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.warmup < 0:
            raise ConfigError(f"warmup must be >= 0, got {self.warmup}")
        if self.window_size < 1:
            raise ConfigError(f"window_size must be >= 1, got {self.window_size}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit value, got {self.seed}")
        if self.flop_cost < 0 or not isfinite(self.flop_cost):
            raise ConfigError(f"flop_cost must be finite and >= 0, got {self.flop_cost}")
        self._validate_np()

    def _validate_np(self):
        name, ranks = self.benchmark, self.np
        if name in ("latency", "bw", "bibw"):
            if ranks != 2:
                raise ConfigError(f"{name} requires np = 2, got {ranks}")
        elif name == "mult_lat":
            if ranks < 2 or ranks % 2:
                raise ConfigError(f"mult_lat requires even np >= 2, got {ranks}")
        elif name in ML_BENCHMARKS:
            if ranks < 1:
                raise ConfigError(f"{name} requires np >= 1, got {ranks}")
        elif ranks < 2:
            raise ConfigError(f"{name} requires np >= 2, got {ranks}")


@dataclass(frozen=True)
class SampleStats:
    """Average / min / max of a latency sample set, in microseconds."""

    avg_us: float
    min_us: float
    max_us: float

    def __post_init__(self):
        for name in ("avg_us", "min_us", "max_us"):
            value = getattr(self, name)
            if not isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not self.min_us <= self.avg_us <= self.max_us:
            raise ValueError(
                f"expected min <= avg <= max, got {self.min_us}, {self.avg_us}, {self.max_us}"
            )


@dataclass(frozen=True)
class BenchRecord:
    """One output row: a message size and its measured metric."""

    size: int
    metric_kind: str
    value: SampleStats

    def __post_init__(self):
        if self.metric_kind not in (LATENCY_US, BANDWIDTH_MBPS):
            raise ValueError(f"unknown metric kind {self.metric_kind!r}")
        if self.metric_kind == BANDWIDTH_MBPS and not (
            self.value.min_us == self.value.avg_us == self.value.max_us
        ):
            raise ValueError("bandwidth records carry a single value (min = avg = max)")


def summarize(samples) -> SampleStats:
    """Mean / min / max of a nonempty list of microsecond values.

    The mean uses compensated summation, so it is invariant under permutation
    of the samples.
    """
    samples = list(samples)
    if not samples:
        raise ConfigError("cannot summarize an empty sample list")
    for value in samples:
        if not isfinite(value) or value < 0:
            raise ConfigError(f"samples must be finite and >= 0, got {value}")
    lo, hi = min(samples), max(samples)
    # the division after an exact fsum can round one ulp past the range
    avg = min(max(fsum(samples) / len(samples), lo), hi)
    return SampleStats(avg_us=avg, min_us=lo, max_us=hi)


def bandwidth_mbps(total_bytes: int, elapsed_us: float) -> float:
    """Bandwidth in MB/s (= bytes per microsecond) for a transfer."""
    if elapsed_us <= 0:
        raise MeasurementError(f"elapsed time must be > 0, got {elapsed_us}")
    return total_bytes / elapsed_us
