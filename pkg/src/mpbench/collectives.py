"""Blocking collectives built from transport send/recv.

One canonical algorithm per operation, chosen for determinism:

* barrier -- dissemination, ceil(log2 P) rounds, partner ``(rank +- 2^r) % P``
* bcast / reduce -- binomial tree rooted at ``root``
* gather / scatter -- linear, root iterates ranks in ascending order
* allgather -- ring, P - 1 rounds
* alltoall -- pairwise exchange, round r pairs ``rank + r`` with ``rank - r``
* allreduce -- reduce to rank 0 then bcast
* reduce_scatter -- reduce to rank 0 then scatterv

Reduction combines contributions in ascending-rank order (the tree forwards
raw operands; the fold happens at the root), so float64 results are bitwise
reproducible and equal to a serial left fold over the per-rank inputs.

Collective traffic uses a reserved tag space (high bit set) plus a per-call
sequence number, so it can never collide with user point-to-point tags.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CorruptionError
from .transport import RankContext

__all__ = [
    "ReduceOp",
    "VectorLayout",
    "barrier",
    "bcast",
    "reduce",
    "allreduce",
    "gather",
    "scatter",
    "allgather",
    "alltoall",
    "reduce_scatter",
    "gatherv",
    "scatterv",
    "allgatherv",
    "alltoallv",
]

_TAG_BASE = 1 << 31
_TOKEN = b"\x00"

_ELEMENT_DTYPES = {"int64": np.dtype("<i8"), "float64": np.dtype("<f8")}


@dataclass(frozen=True)
class ReduceOp:
    """Element-wise reduction descriptor; sum is the only supported kind."""

    kind: str = "sum"
    element_type: str = "float64"

    def __post_init__(self):
        if self.kind != "sum":
            raise ConfigError(f"unsupported reduction kind {self.kind!r}")
        if self.element_type not in _ELEMENT_DTYPES:
            raise ConfigError(f"unsupported element type {self.element_type!r}")

    @property
    def dtype(self):
        return _ELEMENT_DTYPES[self.element_type]

    @property
    def width(self) -> int:
        return self.dtype.itemsize


@dataclass(frozen=True)
class VectorLayout:
    """Per-rank counts and displacements for the v-variant collectives."""

    counts: tuple
    displacements: tuple

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(
            self, "displacements", tuple(int(d) for d in self.displacements)
        )
        if len(self.counts) != len(self.displacements):
            raise ConfigError("counts and displacements must have equal length")
        if any(c < 0 for c in self.counts):
            raise ConfigError("counts must be >= 0")
        if any(d < 0 for d in self.displacements):
            raise ConfigError("displacements must be >= 0")

    @classmethod
    def contiguous(cls, counts) -> "VectorLayout":
        """Tightly packed layout: displacement i = sum of counts before i."""
        displs, offset = [], 0
        for count in counts:
            displs.append(offset)
            offset += count
        return cls(tuple(counts), tuple(displs))

    @property
    def extent(self) -> int:
        regions = [d + c for c, d in zip(self.counts, self.displacements)]
        return max(regions, default=0)


def _next_tag(ctx: RankContext) -> int:
    tag = _TAG_BASE | (ctx._coll_seq & 0x7FFFFFFF)
    ctx._coll_seq += 1
    return tag


def _check_root(ctx: RankContext, root: int):
    if not 0 <= root < ctx.world_size:
        raise ConfigError(f"invalid root rank {root}")


def _check_layout(ctx: RankContext, layout: VectorLayout):
    if len(layout.counts) != ctx.world_size:
        raise ConfigError(
            f"layout describes {len(layout.counts)} ranks, world has {ctx.world_size}"
        )
    regions = sorted(
        (d, d + c) for c, d in zip(layout.counts, layout.displacements) if c > 0
    )
    for (_, end), (start, _) in zip(regions, regions[1:]):
        if start < end:
            raise ConfigError("layout regions overlap")


def barrier(ctx: RankContext) -> None:
    """Dissemination barrier; on return every rank's clock has caught up with
    every other rank's clock at entry."""
    size = ctx.world_size
    if size == 1:
        return
    tag = _next_tag(ctx)
    dist = 1
    while dist < size:
        ctx.send((ctx.rank + dist) % size, tag, _TOKEN)
        ctx.recv((ctx.rank - dist) % size, tag)
        dist <<= 1


def bcast(ctx: RankContext, payload=None, root: int = 0) -> bytes:
    """Binomial-tree broadcast of ``payload`` from ``root``; returns it everywhere."""
    _check_root(ctx, root)
    size = ctx.world_size
    tag = _next_tag(ctx)
    relative = (ctx.rank - root) % size
    if relative == 0:
        if payload is None:
            raise ConfigError("bcast root must supply a payload")
        data = bytes(payload)
    mask = 1
    while mask < size:
        if relative & mask:
            data = ctx.recv((relative - mask + root) % size, tag)
            break
        mask <<= 1
    mask >>= 1
    while mask > 0:
        if relative + mask < size:
            ctx.send((relative + mask + root) % size, tag, data)
        mask >>= 1
    return data


def _gather_tree(ctx: RankContext, payload: bytes, root: int, tag: int):
    """Binomial gather of equal-size contributions toward ``root``.

    Returns the list of per-rank chunks in ascending absolute rank order at
    the root, None elsewhere. Used by reduce so the root can fold operands in
    rank order.
    """
    size = ctx.world_size
    nbytes = len(payload)
    relative = (ctx.rank - root) % size
    buffer = payload  # covers relative ranks [relative, relative + held)
    held = 1
    mask = 1
    while mask < size:
        if relative & mask:
            ctx.send((relative - mask + root) % size, tag, buffer)
            return None
        child = relative + mask
        if child < size:
            expected = min(mask, size - child)
            chunk = ctx.recv((child + root) % size, tag)
            if len(chunk) != expected * nbytes:
                raise CorruptionError(
                    f"rank {ctx.rank}: subtree at relative rank {child} sent "
                    f"{len(chunk)} bytes, expected {expected * nbytes}"
                )
            buffer += chunk
            held += expected
        mask <<= 1
    chunks = [None] * size
    for j in range(size):
        chunks[(root + j) % size] = buffer[j * nbytes:(j + 1) * nbytes]
    return chunks


def reduce(ctx: RankContext, payload, op: ReduceOp, root: int = 0) -> bytes:
    """Element-wise reduction to ``root`` (empty bytes elsewhere).

    Contributions travel a binomial tree as raw operands and are folded at the
    root in ascending rank order.
    """
    _check_root(ctx, root)
    data = bytes(payload)
    if len(data) % op.width:
        raise ConfigError(
            f"payload length {len(data)} not divisible by element width {op.width}"
        )
    tag = _next_tag(ctx)
    chunks = _gather_tree(ctx, data, root, tag)
    if chunks is None:
        return b""
    acc = np.frombuffer(chunks[0], dtype=op.dtype).copy()
    for chunk in chunks[1:]:
        acc += np.frombuffer(chunk, dtype=op.dtype)
    return acc.tobytes()


def allreduce(ctx: RankContext, payload, op: ReduceOp) -> bytes:
    """Reduction delivered to every rank: reduce to rank 0, then bcast."""
    reduced = reduce(ctx, payload, op, root=0)
    return bcast(ctx, reduced if ctx.rank == 0 else None, root=0)


def gather(ctx: RankContext, payload, root: int = 0) -> bytes:
    """Concatenation of equal-size payloads in rank order at ``root``."""
    _check_root(ctx, root)
    data = bytes(payload)
    tag = _next_tag(ctx)
    if ctx.rank != root:
        ctx.send(root, tag, data)
        return b""
    parts = [data] * ctx.world_size
    for src in range(ctx.world_size):
        if src == root:
            continue
        parts[src] = ctx.recv(src, tag)
        if len(parts[src]) != len(data):
            raise CorruptionError(
                f"gather: rank {src} sent {len(parts[src])} bytes, expected {len(data)}"
            )
    return b"".join(parts)


def scatter(ctx: RankContext, chunks=None, root: int = 0) -> bytes:
    """Root distributes one equal-size chunk per rank; returns this rank's."""
    _check_root(ctx, root)
    tag = _next_tag(ctx)
    if ctx.rank != root:
        return ctx.recv(root, tag)
    if chunks is None or len(chunks) != ctx.world_size:
        raise ConfigError(
            f"scatter root needs exactly {ctx.world_size} chunks, got "
            f"{0 if chunks is None else len(chunks)}"
        )
    chunks = [bytes(c) for c in chunks]
    if len({len(c) for c in chunks}) > 1:
        raise ConfigError("scatter chunks must all have the same size")
    for dst in range(ctx.world_size):
        if dst != root:
            ctx.send(dst, tag, chunks[dst])
    return chunks[root]


def allgather(ctx: RankContext, payload) -> bytes:
    """Ring allgather: concatenation of all payloads in rank order, everywhere."""
    data = bytes(payload)
    size = ctx.world_size
    if size == 1:
        return data
    tag = _next_tag(ctx)
    right = (ctx.rank + 1) % size
    left = (ctx.rank - 1) % size
    parts = [b""] * size
    parts[ctx.rank] = data
    current = data
    for round_idx in range(size - 1):
        ctx.send(right, tag, current)
        current = ctx.recv(left, tag)
        if len(current) != len(data):
            raise CorruptionError(
                f"allgather: received {len(current)} bytes, expected {len(data)}"
            )
        parts[(ctx.rank - round_idx - 1) % size] = current
    return b"".join(parts)


def alltoall(ctx: RankContext, chunks) -> list[bytes]:
    """Pairwise-exchange alltoall; ``out[j]`` is what rank j addressed to us."""
    size = ctx.world_size
    if len(chunks) != size:
        raise ConfigError(f"alltoall needs exactly {size} chunks, got {len(chunks)}")
    chunks = [bytes(c) for c in chunks]
    if len({len(c) for c in chunks}) > 1:
        raise ConfigError("alltoall chunks must all have the same size")
    tag = _next_tag(ctx)
    out = [b""] * size
    out[ctx.rank] = chunks[ctx.rank]
    for r in range(1, size):
        dst = (ctx.rank + r) % size
        src = (ctx.rank - r) % size
        ctx.send(dst, tag, chunks[dst])
        received = ctx.recv(src, tag)
        if len(received) != len(chunks[0]):
            raise CorruptionError(
                f"alltoall: rank {src} sent {len(received)} bytes, "
                f"expected {len(chunks[0])}"
            )
        out[src] = received
    return out


def reduce_scatter(ctx: RankContext, payload, op: ReduceOp, counts) -> bytes:
    """Full reduction followed by a scatter of segments sized per ``counts``."""
    counts = [int(c) for c in counts]
    if len(counts) != ctx.world_size:
        raise ConfigError(
            f"reduce_scatter needs {ctx.world_size} counts, got {len(counts)}"
        )
    if any(c < 0 for c in counts):
        raise ConfigError("reduce_scatter counts must be >= 0")
    data = bytes(payload)
    if len(data) != sum(counts) * op.width:
        raise ConfigError(
            f"payload carries {len(data)} bytes but counts require "
            f"{sum(counts) * op.width}"
        )
    reduced = reduce(ctx, data, op, root=0)
    layout = VectorLayout.contiguous([c * op.width for c in counts])
    return scatterv(ctx, reduced if ctx.rank == 0 else None, layout, root=0)


def gatherv(ctx: RankContext, payload, layout: VectorLayout, root: int = 0) -> bytes:
    """Gather with per-rank counts/displacements; assembled buffer at ``root``."""
    _check_root(ctx, root)
    _check_layout(ctx, layout)
    data = bytes(payload)
    if len(data) != layout.counts[ctx.rank]:
        raise ConfigError(
            f"rank {ctx.rank} payload is {len(data)} bytes, layout says "
            f"{layout.counts[ctx.rank]}"
        )
    tag = _next_tag(ctx)
    if ctx.rank != root:
        ctx.send(root, tag, data)
        return b""
    buffer = bytearray(layout.extent)
    buffer[layout.displacements[root]:layout.displacements[root] + len(data)] = data
    for src in range(ctx.world_size):
        if src == root:
            continue
        chunk = ctx.recv(src, tag)
        if len(chunk) != layout.counts[src]:
            raise CorruptionError(
                f"gatherv: rank {src} sent {len(chunk)} bytes, layout says "
                f"{layout.counts[src]}"
            )
        offset = layout.displacements[src]
        buffer[offset:offset + len(chunk)] = chunk
    return bytes(buffer)


def scatterv(ctx: RankContext, payload=None, layout: VectorLayout = None, root: int = 0) -> bytes:
    """Scatter slices of the root buffer per layout; returns this rank's slice."""
    _check_root(ctx, root)
    _check_layout(ctx, layout)
    tag = _next_tag(ctx)
    if ctx.rank != root:
        chunk = ctx.recv(root, tag)
        if len(chunk) != layout.counts[ctx.rank]:
            raise CorruptionError(
                f"scatterv: received {len(chunk)} bytes, layout says "
                f"{layout.counts[ctx.rank]}"
            )
        return chunk
    if payload is None:
        raise ConfigError("scatterv root must supply a payload")
    data = bytes(payload)
    if layout.extent > len(data):
        raise ConfigError(
            f"layout extent {layout.extent} exceeds payload length {len(data)}"
        )
    for dst in range(ctx.world_size):
        if dst == root:
            continue
        offset = layout.displacements[dst]
        ctx.send(dst, tag, data[offset:offset + layout.counts[dst]])
    offset = layout.displacements[root]
    return data[offset:offset + layout.counts[root]]


def allgatherv(ctx: RankContext, payload, layout: VectorLayout) -> bytes:
    """Ring allgather with per-rank counts; assembled buffer on every rank."""
    _check_layout(ctx, layout)
    data = bytes(payload)
    if len(data) != layout.counts[ctx.rank]:
        raise ConfigError(
            f"rank {ctx.rank} payload is {len(data)} bytes, layout says "
            f"{layout.counts[ctx.rank]}"
        )
    size = ctx.world_size
    parts = [b""] * size
    parts[ctx.rank] = data
    if size > 1:
        tag = _next_tag(ctx)
        right = (ctx.rank + 1) % size
        left = (ctx.rank - 1) % size
        current = data
        for round_idx in range(size - 1):
            ctx.send(right, tag, current)
            current = ctx.recv(left, tag)
            origin = (ctx.rank - round_idx - 1) % size
            if len(current) != layout.counts[origin]:
                raise CorruptionError(
                    f"allgatherv: block from rank {origin} is {len(current)} bytes, "
                    f"layout says {layout.counts[origin]}"
                )
            parts[origin] = current
    buffer = bytearray(layout.extent)
    for rank_idx, chunk in enumerate(parts):
        offset = layout.displacements[rank_idx]
        buffer[offset:offset + len(chunk)] = chunk
    return bytes(buffer)


def alltoallv(ctx: RankContext, payload, layout: VectorLayout) -> bytes:
    """Pairwise alltoall where every rank sends slice j of its buffer to rank j.

    The result is the tight concatenation, in source-rank order, of the slices
    addressed to this rank (each ``layout.counts[rank]`` bytes).
    """
    _check_layout(ctx, layout)
    data = bytes(payload)
    if layout.extent > len(data):
        raise ConfigError(
            f"layout extent {layout.extent} exceeds payload length {len(data)}"
        )
    size = ctx.world_size
    tag = _next_tag(ctx)
    mine = layout.counts[ctx.rank]
    own_offset = layout.displacements[ctx.rank]
    out = [b""] * size
    out[ctx.rank] = data[own_offset:own_offset + mine]
    for r in range(1, size):
        dst = (ctx.rank + r) % size
        src = (ctx.rank - r) % size
        offset = layout.displacements[dst]
        ctx.send(dst, tag, data[offset:offset + layout.counts[dst]])
        received = ctx.recv(src, tag)
        if len(received) != mine:
            raise CorruptionError(
                f"alltoallv: rank {src} sent {len(received)} bytes, expected {mine}"
            )
        out[src] = received
    return b"".join(out)
