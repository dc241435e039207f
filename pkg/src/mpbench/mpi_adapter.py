"""Optional mpi4py backend: same driver contract, wall-clock timing.

Launch under an MPI runner, e.g.:

    mpirun -n 2 python -m mpbench --transport mpi --benchmark latency

The adapter provides a :class:`MpiRankContext` that duck-types the simulated
``RankContext`` (send/recv/now/advance), so the benchmark drivers and the
collective algorithms run unchanged. ``advance`` is a no-op here because
compute takes real time; channel parameters only matter for the simulator.
ML benchmarks are not wired to this backend.
"""

import time

from .benches import BenchReport, driver_for
from .core import ML_BENCHMARKS, BenchConfig
from .errors import ConfigError
from .transport import ChannelModel

__all__ = ["MpiRankContext", "run_mpi_benchmark"]

_RESERVED_BIT = 1 << 31


class MpiRankContext:
    """Rank handle backed by ``MPI.COMM_WORLD``; clocks are wall time in us."""

    def __init__(self, channel: ChannelModel):
        from mpi4py import MPI

        self._mpi = MPI
        self._comm = MPI.COMM_WORLD
        self.rank = self._comm.Get_rank()
        self.world_size = self._comm.Get_size()
        self.channel = channel
        self._coll_seq = 0
        self._tag_ub = self._comm.Get_attr(MPI.TAG_UB) or 32767
        self._start = time.perf_counter()

    @property
    def clock(self) -> float:
        return self.now()

    def now(self) -> float:
        return (time.perf_counter() - self._start) * 1e6

    def advance(self, cost_us: float) -> None:
        if cost_us < 0:
            raise ConfigError(f"advance cost must be >= 0, got {cost_us}")
        # wall-clock backend: real compute already shows up in now()

    def _fold_tag(self, tag: int) -> int:
        # collective tags set bit 31, which MPI tags cannot carry; remap the
        # reserved bit to bit 30 and keep the sequence bits below it
        if tag & _RESERVED_BIT:
            tag = (tag & 0x3FFFFFFF) | (1 << 30)
        if tag > self._tag_ub:
            raise ConfigError(f"tag {tag} exceeds MPI TAG_UB {self._tag_ub}")
        return tag

    def send(self, dst: int, tag: int, payload) -> None:
        if not 0 <= dst < self.world_size or dst == self.rank:
            raise ConfigError(f"invalid destination rank {dst} (self={self.rank})")
        self._comm.Send(
            [bytes(payload), self._mpi.BYTE], dest=dst, tag=self._fold_tag(tag)
        )

    def recv(self, src: int, tag: int) -> bytes:
        if not 0 <= src < self.world_size or src == self.rank:
            raise ConfigError(f"invalid source rank {src} (self={self.rank})")
        folded = self._fold_tag(tag)
        status = self._mpi.Status()
        self._comm.Probe(source=src, tag=folded, status=status)
        buffer = bytearray(status.Get_count(self._mpi.BYTE))
        self._comm.Recv([buffer, self._mpi.BYTE], source=src, tag=folded)
        return bytes(buffer)


def run_mpi_benchmark(cfg: BenchConfig) -> BenchReport | None:
    """Run one communication benchmark on MPI ranks; report at rank 0 only."""
    if cfg.benchmark in ML_BENCHMARKS:
        raise ConfigError(
            "ML benchmarks run on the simulated transport only (--transport sim)"
        )
    try:
        ctx = MpiRankContext(cfg.channel)
    except ImportError as exc:
        raise ConfigError(
            "transport 'mpi' needs the mpi4py package (pip install mpbench[mpi])"
        ) from exc
    if ctx.world_size != cfg.np:
        raise ConfigError(
            f"launched with {ctx.world_size} MPI ranks but --np is {cfg.np}"
        )
    records = driver_for(cfg.benchmark)(ctx, cfg)
    if ctx.rank != 0:
        return None
    return BenchReport(cfg.benchmark, cfg.buffer_mode, cfg.np, tuple(records))
