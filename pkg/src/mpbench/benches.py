"""Benchmark drivers: warm-up, timed iterations, per-size records.

Every driver runs the same pipeline per message size: a barrier so all ranks
enter together, untimed warm-up iterations, then a timed region measured on
logical clocks. Latency-style results are averaged per call; ping-pong latency
is the round-trip time halved. Collective records aggregate per-rank averages
across ranks (sum-reduce for the average, gather for min/max) at rank 0, which
emits the record.

Buffer modes: ``direct`` sends payload bytes as-is. ``serialized`` frames each
point-to-point benchmark payload with :func:`~mpbench.transport.encode_payload`
before sending and decodes after receiving, charging ``sigma`` per byte on
both sides. Collective benchmarks charge the same encode/decode costs at the
operation boundary (contribution in, result out); the collective's internal
messages are never framed.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import collectives
from .collectives import ReduceOp, VectorLayout
from .core import (
    BANDWIDTH_MBPS,
    LATENCY_US,
    ML_BENCHMARKS,
    BenchConfig,
    BenchRecord,
    SampleStats,
    bandwidth_mbps,
    sweep_sizes,
)
from .errors import ConfigError
from .transport import (
    RankContext,
    decode_payload,
    encode_payload,
    frame_payload,
    spawn_world,
)

__all__ = [
    "BenchReport",
    "run_latency",
    "run_bandwidth",
    "run_bibw",
    "run_mult_lat",
    "run_collective",
    "run_benchmark",
    "driver_for",
]

_PINGPONG_TAG = 1
_DATA_TAG = 2
_ACK_TAG = 3
_ACK = b"\x00\x00\x00\x00"

_SUM_F64 = ReduceOp("sum", "float64")
_DOUBLE = struct.Struct("<d")


@dataclass(frozen=True)
class BenchReport:
    """One benchmark run: per-size records plus identifying metadata."""

    benchmark: str
    buffer_mode: str
    np: int
    records: tuple

    def __post_init__(self):
        if not self.records:
            raise ValueError("a benchmark report needs at least one record")


def _payload(seed: int, stream: int, size: int) -> bytes:
    rng = np.random.default_rng([seed, stream, size])
    return rng.bytes(size)


def _reduce_vector(seed: int, stream: int, nelems: int) -> bytes:
    rng = np.random.default_rng([seed, stream, nelems])
    return rng.random(nelems).tobytes()


def _send_mode(ctx: RankContext, cfg: BenchConfig, dst: int, tag: int, buf: bytes):
    if cfg.buffer_mode == "serialized":
        ctx.send(dst, tag, encode_payload(ctx, buf))
    else:
        ctx.send(dst, tag, buf)


def _recv_mode(ctx: RankContext, cfg: BenchConfig, src: int, tag: int) -> bytes:
    data = ctx.recv(src, tag)
    if cfg.buffer_mode == "serialized":
        return decode_payload(ctx, data)
    return data


def _charge_encode(ctx: RankContext, cfg: BenchConfig, data: bytes):
    """Serialized-mode cost of pickling a contribution (frame discarded)."""
    if cfg.buffer_mode == "serialized":
        encode_payload(ctx, data)


def _charge_decode(ctx: RankContext, cfg: BenchConfig, data: bytes):
    """Serialized-mode cost of unpickling a received result."""
    if cfg.buffer_mode == "serialized":
        decode_payload(ctx, frame_payload(data))


def _latency_record(size: int, latency_us: float) -> BenchRecord:
    stats = SampleStats(latency_us, latency_us, latency_us)
    return BenchRecord(size=size, metric_kind=LATENCY_US, value=stats)


def _bandwidth_record(size: int, mbps: float) -> BenchRecord:
    stats = SampleStats(mbps, mbps, mbps)
    return BenchRecord(size=size, metric_kind=BANDWIDTH_MBPS, value=stats)


def _stats_to_root(ctx: RankContext, value: float) -> SampleStats | None:
    """Combine one per-rank scalar into avg/min/max at rank 0.

    The average comes from a sum-reduction; min/max fold over the gathered
    values (ReduceOp supports sum only).
    """
    packed = _DOUBLE.pack(value)
    total = collectives.reduce(ctx, packed, _SUM_F64, root=0)
    gathered = collectives.gather(ctx, packed, root=0)
    if ctx.rank != 0:
        return None
    values = struct.unpack(f"<{ctx.world_size}d", gathered)
    avg = _DOUBLE.unpack(total)[0] / ctx.world_size
    lo, hi = min(values), max(values)
    # the float fold can land a rounding ulp outside [lo, hi]
    avg = min(max(avg, lo), hi)
    return SampleStats(avg_us=avg, min_us=lo, max_us=hi)


# ---------------------------------------------------------------------------
# point-to-point drivers


def _pingpong_round(ctx, cfg, peer, buf, initiator):
    if initiator:
        _send_mode(ctx, cfg, peer, _PINGPONG_TAG, buf)
        _recv_mode(ctx, cfg, peer, _PINGPONG_TAG)
    else:
        _recv_mode(ctx, cfg, peer, _PINGPONG_TAG)
        _send_mode(ctx, cfg, peer, _PINGPONG_TAG, buf)


def _latency_program(ctx: RankContext, cfg: BenchConfig):
    peer = 1 - ctx.rank
    records = [] if ctx.rank == 0 else None
    for size in sweep_sizes(cfg.sweep):
        buf = _payload(cfg.seed, ctx.rank, size)
        collectives.barrier(ctx)
        for _ in range(cfg.warmup):
            _pingpong_round(ctx, cfg, peer, buf, ctx.rank == 0)
        start = ctx.now()
        for _ in range(cfg.iterations):
            _pingpong_round(ctx, cfg, peer, buf, ctx.rank == 0)
        if ctx.rank == 0:
            latency = (ctx.now() - start) / (2 * cfg.iterations)
            records.append(_latency_record(size, latency))
    return records


def _bw_iteration(ctx, cfg, buf, window):
    if ctx.rank == 0:
        for _ in range(window):
            _send_mode(ctx, cfg, 1, _DATA_TAG, buf)
        _recv_mode(ctx, cfg, 1, _ACK_TAG)
    else:
        for _ in range(window):
            _recv_mode(ctx, cfg, 0, _DATA_TAG)
        _send_mode(ctx, cfg, 0, _ACK_TAG, _ACK)


def _bandwidth_program(ctx: RankContext, cfg: BenchConfig):
    records = [] if ctx.rank == 0 else None
    window = cfg.window_size
    for size in sweep_sizes(cfg.sweep):
        buf = _payload(cfg.seed, 0, size)
        collectives.barrier(ctx)
        for _ in range(cfg.warmup):
            _bw_iteration(ctx, cfg, buf, window)
        start = ctx.now()
        for _ in range(cfg.iterations):
            _bw_iteration(ctx, cfg, buf, window)
        if ctx.rank == 0:
            elapsed = ctx.now() - start
            total = window * cfg.iterations * size
            mbps = bandwidth_mbps(total, elapsed) if elapsed > 0 else 0.0
            records.append(_bandwidth_record(size, mbps))
    return records


def _bibw_iteration(ctx, cfg, buf, window_out, window_in):
    peer = 1 - ctx.rank
    for _ in range(window_out):
        _send_mode(ctx, cfg, peer, _DATA_TAG, buf)
    for _ in range(window_in):
        _recv_mode(ctx, cfg, peer, _DATA_TAG)
    if window_in:
        _send_mode(ctx, cfg, peer, _ACK_TAG, _ACK)
    if window_out:
        _recv_mode(ctx, cfg, peer, _ACK_TAG)


def _bibw_program(ctx: RankContext, cfg: BenchConfig, windows=None):
    """Both ranks stream a window at each other; reports the directions' sum.

    ``windows`` overrides the per-rank window counts (used by tests to check
    that a one-sided run degenerates to the plain bandwidth benchmark).
    """
    if windows is None:
        windows = (cfg.window_size, cfg.window_size)
    window_out = windows[ctx.rank]
    window_in = windows[1 - ctx.rank]
    records = [] if ctx.rank == 0 else None
    for size in sweep_sizes(cfg.sweep):
        buf = _payload(cfg.seed, ctx.rank, size)
        collectives.barrier(ctx)
        for _ in range(cfg.warmup):
            _bibw_iteration(ctx, cfg, buf, window_out, window_in)
        start = ctx.now()
        for _ in range(cfg.iterations):
            _bibw_iteration(ctx, cfg, buf, window_out, window_in)
        elapsed = ctx.now() - start
        total = window_out * cfg.iterations * size
        mbps = bandwidth_mbps(total, elapsed) if total and elapsed > 0 else 0.0
        summed = collectives.reduce(ctx, _DOUBLE.pack(mbps), _SUM_F64, root=0)
        if ctx.rank == 0:
            records.append(_bandwidth_record(size, _DOUBLE.unpack(summed)[0]))
    return records


def _mult_lat_program(ctx: RankContext, cfg: BenchConfig):
    size_world = ctx.world_size
    half = size_world // 2
    low = ctx.rank < half
    peer = ctx.rank + half if low else ctx.rank - half
    pair_layout = VectorLayout.contiguous(
        [_DOUBLE.size] * half + [0] * (size_world - half)
    )
    records = [] if ctx.rank == 0 else None
    for size in sweep_sizes(cfg.sweep):
        buf = _payload(cfg.seed, ctx.rank, size)
        collectives.barrier(ctx)
        for _ in range(cfg.warmup):
            _pingpong_round(ctx, cfg, peer, buf, low)
        start = ctx.now()
        for _ in range(cfg.iterations):
            _pingpong_round(ctx, cfg, peer, buf, low)
        latency = (ctx.now() - start) / (2 * cfg.iterations) if low else 0.0
        summed = collectives.allreduce(ctx, _DOUBLE.pack(latency), _SUM_F64)
        gathered = collectives.gatherv(
            ctx, _DOUBLE.pack(latency) if low else b"", pair_layout, root=0
        )
        if ctx.rank == 0:
            pair_lats = struct.unpack(f"<{half}d", gathered)
            avg = _DOUBLE.unpack(summed)[0] / half
            lo, hi = min(pair_lats), max(pair_lats)
            avg = min(max(avg, lo), hi)
            records.append(
                BenchRecord(size, LATENCY_US, SampleStats(avg, lo, hi))
            )
    return records


# ---------------------------------------------------------------------------
# collective drivers


def _weighted_counts(size: int, world_size: int) -> list[int]:
    """Deterministic v-variant distribution: rank i weighted by i + 1,
    floor division, remainder to rank 0."""
    total_weight = world_size * (world_size + 1) // 2
    counts = [size * (i + 1) // total_weight for i in range(world_size)]
    counts[0] += size - sum(counts)
    return counts


def _even_counts(total: int, world_size: int) -> list[int]:
    base, rem = divmod(total, world_size)
    return [base + (1 if i < rem else 0) for i in range(world_size)]


def _make_collective_call(ctx: RankContext, cfg: BenchConfig, size: int):
    name = cfg.benchmark
    rank, world = ctx.rank, ctx.world_size
    seed = cfg.seed

    if name == "barrier":
        return lambda: collectives.barrier(ctx)

    if name == "bcast":
        data = _payload(seed, 0, size)

        def call():
            if rank == 0:
                _charge_encode(ctx, cfg, data)
            result = collectives.bcast(ctx, data if rank == 0 else None, root=0)
            _charge_decode(ctx, cfg, result)

        return call

    if name == "gather":
        data = _payload(seed, rank, size)

        def call():
            _charge_encode(ctx, cfg, data)
            result = collectives.gather(ctx, data, root=0)
            if rank == 0:
                _charge_decode(ctx, cfg, result)

        return call

    if name == "scatter":
        chunks = [_payload(seed, i, size) for i in range(world)] if rank == 0 else None

        def call():
            if rank == 0:
                _charge_encode(ctx, cfg, b"".join(chunks))
            result = collectives.scatter(ctx, chunks, root=0)
            _charge_decode(ctx, cfg, result)

        return call

    if name == "allgather":
        data = _payload(seed, rank, size)

        def call():
            _charge_encode(ctx, cfg, data)
            result = collectives.allgather(ctx, data)
            _charge_decode(ctx, cfg, result)

        return call

    if name == "alltoall":
        chunks = [_payload(seed, rank * world + j, size) for j in range(world)]

        def call():
            _charge_encode(ctx, cfg, b"".join(chunks))
            result = collectives.alltoall(ctx, chunks)
            _charge_decode(ctx, cfg, b"".join(result))

        return call

    if name in ("reduce", "allreduce"):
        vector = _reduce_vector(seed, rank, size // 8)

        def call():
            _charge_encode(ctx, cfg, vector)
            if name == "reduce":
                result = collectives.reduce(ctx, vector, _SUM_F64, root=0)
                if rank == 0:
                    _charge_decode(ctx, cfg, result)
            else:
                result = collectives.allreduce(ctx, vector, _SUM_F64)
                _charge_decode(ctx, cfg, result)

        return call

    if name == "reduce_scatter":
        nelems = size // 8
        counts = _even_counts(nelems, world)
        vector = _reduce_vector(seed, rank, nelems)

        def call():
            _charge_encode(ctx, cfg, vector)
            result = collectives.reduce_scatter(ctx, vector, _SUM_F64, counts)
            _charge_decode(ctx, cfg, result)

        return call

    if name in ("gatherv", "scatterv", "allgatherv", "alltoallv"):
        layout = VectorLayout.contiguous(_weighted_counts(size, world))

        if name == "gatherv":
            data = _payload(seed, rank, layout.counts[rank])

            def call():
                _charge_encode(ctx, cfg, data)
                result = collectives.gatherv(ctx, data, layout, root=0)
                if rank == 0:
                    _charge_decode(ctx, cfg, result)

        elif name == "scatterv":
            data = _payload(seed, 0, size) if rank == 0 else None

            def call():
                if rank == 0:
                    _charge_encode(ctx, cfg, data)
                result = collectives.scatterv(ctx, data, layout, root=0)
                _charge_decode(ctx, cfg, result)

        elif name == "allgatherv":
            data = _payload(seed, rank, layout.counts[rank])

            def call():
                _charge_encode(ctx, cfg, data)
                result = collectives.allgatherv(ctx, data, layout)
                _charge_decode(ctx, cfg, result)

        else:  # alltoallv
            data = _payload(seed, rank, size)

            def call():
                _charge_encode(ctx, cfg, data)
                result = collectives.alltoallv(ctx, data, layout)
                _charge_decode(ctx, cfg, result)

        return call

    raise ConfigError(f"no collective driver for benchmark {name!r}")


def _timed_average(ctx: RankContext, cfg: BenchConfig, call) -> float:
    collectives.barrier(ctx)
    for _ in range(cfg.warmup):
        call()
    start = ctx.now()
    for _ in range(cfg.iterations):
        call()
    return (ctx.now() - start) / cfg.iterations


def _collective_program(ctx: RankContext, cfg: BenchConfig):
    records = [] if ctx.rank == 0 else None
    if cfg.benchmark == "barrier":
        sizes = [0]  # barrier carries no payload: exactly one record
    else:
        sizes = sweep_sizes(cfg.sweep)
    for size in sizes:
        call = _make_collective_call(ctx, cfg, size)
        per_call = _timed_average(ctx, cfg, call)
        stats = _stats_to_root(ctx, per_call)
        if ctx.rank == 0:
            records.append(BenchRecord(size, LATENCY_US, stats))
    return records


# ---------------------------------------------------------------------------
# dispatch

_P2P_PROGRAMS = {
    "latency": _latency_program,
    "bw": _bandwidth_program,
    "bibw": _bibw_program,
    "mult_lat": _mult_lat_program,
}


def driver_for(benchmark: str):
    """Per-rank program implementing ``benchmark`` (signature ``(ctx, cfg)``)."""
    if benchmark in _P2P_PROGRAMS:
        return _P2P_PROGRAMS[benchmark]
    if benchmark in ML_BENCHMARKS:
        raise ConfigError(f"{benchmark} is an ML benchmark; use run_ml_benchmark")
    return _collective_program


def _run_with_driver(cfg: BenchConfig) -> BenchReport:
    program = driver_for(cfg.benchmark)
    results = spawn_world(cfg.np, cfg.channel, lambda ctx: program(ctx, cfg))
    records = tuple(results[0])
    expected = 1 if cfg.benchmark == "barrier" else len(sweep_sizes(cfg.sweep))
    if len(records) != expected:
        raise RuntimeError(
            f"driver produced {len(records)} records, expected {expected}"
        )
    return BenchReport(cfg.benchmark, cfg.buffer_mode, cfg.np, records)


def _expect(cfg: BenchConfig, *names: str):
    if cfg.benchmark not in names:
        raise ConfigError(
            f"config is for {cfg.benchmark!r}, expected one of {names}"
        )


def run_latency(cfg: BenchConfig) -> BenchReport:
    """Ping-pong latency (np = 2); reported value is round trip / 2."""
    _expect(cfg, "latency")
    return _run_with_driver(cfg)


def run_bandwidth(cfg: BenchConfig) -> BenchReport:
    """Windowed streaming bandwidth in MB/s (np = 2)."""
    _expect(cfg, "bw")
    return _run_with_driver(cfg)


def run_bibw(cfg: BenchConfig) -> BenchReport:
    """Bi-directional bandwidth: both ranks stream; directions summed."""
    _expect(cfg, "bibw")
    return _run_with_driver(cfg)


def run_mult_lat(cfg: BenchConfig) -> BenchReport:
    """Concurrent ping-pong across rank pairs (i, i + np/2)."""
    _expect(cfg, "mult_lat")
    return _run_with_driver(cfg)


def run_collective(cfg: BenchConfig) -> BenchReport:
    """Any blocking collective or v-variant benchmark."""
    if cfg.benchmark in _P2P_PROGRAMS or cfg.benchmark in ML_BENCHMARKS:
        raise ConfigError(f"{cfg.benchmark!r} is not a collective benchmark")
    return _run_with_driver(cfg)


def run_benchmark(cfg: BenchConfig):
    """Dispatch ``cfg`` to its driver; ML benchmarks return a SpeedupResult."""
    if cfg.benchmark in ML_BENCHMARKS:
        from . import mlbench

        return mlbench.run_ml_benchmark(cfg)
    return _run_with_driver(cfg)
