"""Deterministic in-process simulated transport.

A *world* of P ranks runs one thread per rank. Ranks exchange byte payloads
through per-``(source, tag)`` FIFO queues and keep per-rank logical clocks in
microseconds. Message cost follows an alpha-beta channel model: a receive of
an n-byte payload completes at

    max(receiver_clock, depart_time + alpha + beta * n)

where ``depart_time`` is the sender's clock at the moment of the (eager,
non-blocking) send. Because matching is explicit and clocks are logical, two
runs of the same world produce bit-identical results and final clocks no
matter how the OS schedules the threads.

Serialization cost is modeled separately: :func:`encode_payload` frames a
payload with an 8-byte little-endian length prefix and charges
``sigma * len(payload)`` to the caller's clock; :func:`decode_payload` strips
and validates the frame and charges the same amount on the receiving side.
"""

import struct
import threading
from collections import deque
from dataclasses import dataclass
from math import isfinite

from .errors import ConfigError, CorruptionError, DeadlockError, RankFailedError

__all__ = [
    "ChannelModel",
    "Envelope",
    "RankContext",
    "spawn_world",
    "encode_payload",
    "decode_payload",
    "frame_payload",
]

_LEN_PREFIX = struct.Struct("<Q")

MAX_TAG = 2**32 - 1


@dataclass(frozen=True)
class ChannelModel:
    """Channel cost parameters, all in microseconds (per byte where noted).

    alpha: fixed cost per message.
    beta: cost per payload byte in transit.
    sigma: cost per byte of serialization work, charged once at encode and
        once at decode of a framed payload.
    """

    alpha: float = 1.0
    beta: float = 0.001
    sigma: float = 0.01

    def __post_init__(self):
        for name in ("alpha", "beta", "sigma"):
            value = getattr(self, name)
            if not isfinite(value) or value < 0:
                raise ConfigError(f"channel {name} must be finite and >= 0, got {value}")

    def transit_us(self, nbytes: int) -> float:
        return self.alpha + self.beta * nbytes


@dataclass(frozen=True)
class Envelope:
    """One message in flight."""

    src: int
    dst: int
    tag: int
    payload: bytes
    depart_time: float


class _Aborted(Exception):
    """Internal: unwinds a rank thread after the world has failed."""


class _World:
    """Shared state for one simulated world; all mutation under one lock."""

    def __init__(self, world_size: int, channel: ChannelModel):
        self.world_size = world_size
        self.channel = channel
        self.lock = threading.Lock()
        self.conds = [threading.Condition(self.lock) for _ in range(world_size)]
        # inboxes[rank][(src, tag)] -> FIFO of Envelope
        self.inboxes = [{} for _ in range(world_size)]
        self.waiting = {}  # rank -> (src, tag) while blocked in recv
        self.done = set()
        self.failure = None

    def _fail(self, exc):
        # lock held
        if self.failure is None:
            self.failure = exc
        for cond in self.conds:
            cond.notify_all()

    def _check_deadlock(self):
        # lock held; true deadlock is stable: every unfinished rank is parked
        # on an empty queue and nobody is left to fill one.
        if self.failure is not None or not self.waiting:
            return
        if len(self.waiting) + len(self.done) != self.world_size:
            return
        for rank, key in self.waiting.items():
            queue = self.inboxes[rank].get(key)
            if queue:
                return
        self._fail(DeadlockError(self.waiting.keys()))


class RankContext:
    """Per-rank communicator handle; confined to its own rank's thread."""

    def __init__(self, world: _World, rank: int):
        self._world = world
        self.rank = rank
        self.world_size = world.world_size
        self.channel = world.channel
        self.clock = 0.0
        self._coll_seq = 0  # collective-call sequence, advanced symmetrically

    def now(self) -> float:
        """Current logical time in microseconds."""
        return self.clock

    def advance(self, cost_us: float) -> None:
        """Add a modeled compute cost to this rank's clock."""
        if cost_us < 0:
            raise ConfigError(f"advance cost must be >= 0, got {cost_us}")
        self.clock += cost_us

    def send(self, dst: int, tag: int, payload) -> None:
        """Eagerly enqueue a message for ``dst``; never blocks, costs nothing."""
        if not 0 <= dst < self.world_size or dst == self.rank:
            raise ConfigError(f"invalid destination rank {dst} (self={self.rank})")
        if not 0 <= tag <= MAX_TAG:
            raise ConfigError(f"tag must fit 32 bits, got {tag}")
        env = Envelope(self.rank, dst, tag, bytes(payload), self.clock)
        world = self._world
        with world.lock:
            if world.failure is not None:
                raise _Aborted()
            queue = world.inboxes[dst].setdefault((self.rank, tag), deque())
            queue.append(env)
            world.conds[dst].notify_all()

    def recv(self, src: int, tag: int) -> bytes:
        """Block until a message from ``(src, tag)`` is available; return it.

        Completion advances the clock to
        ``max(clock, depart + alpha + beta * len(payload))``.
        """
        if not 0 <= src < self.world_size or src == self.rank:
            raise ConfigError(f"invalid source rank {src} (self={self.rank})")
        world = self._world
        key = (src, tag)
        cond = world.conds[self.rank]
        with world.lock:
            queue = world.inboxes[self.rank].setdefault(key, deque())
            while not queue:
                if world.failure is not None:
                    raise _Aborted()
                world.waiting[self.rank] = key
                world._check_deadlock()
                if world.failure is not None:
                    world.waiting.pop(self.rank, None)
                    raise _Aborted()
                cond.wait()
                world.waiting.pop(self.rank, None)
            env = queue.popleft()
        arrival = env.depart_time + self.channel.transit_us(len(env.payload))
        if arrival > self.clock:
            self.clock = arrival
        return env.payload


def spawn_world(world_size: int, channel: ChannelModel, program) -> list:
    """Run ``program(ctx)`` once per rank concurrently; return results by rank.

    The call joins every rank thread before returning. A rank raising aborts
    the whole world with :class:`RankFailedError` naming the rank; a state
    where every unfinished rank blocks in recv on an empty queue raises
    :class:`DeadlockError` naming the blocked ranks.
    """
    if world_size < 1:
        raise ConfigError(f"world size must be >= 1, got {world_size}")
    world = _World(world_size, channel)
    results = [None] * world_size
    failures = {}

    def runner(rank: int, ctx: RankContext):
        try:
            results[rank] = program(ctx)
        except _Aborted:
            pass
        except BaseException as exc:  # noqa: BLE001 - reported via spawn_world
            failures[rank] = exc
            with world.lock:
                world._fail(RankFailedError(rank, exc))
        finally:
            with world.lock:
                world.done.add(rank)
                world._check_deadlock()

    contexts = [RankContext(world, rank) for rank in range(world_size)]
    threads = [
        threading.Thread(target=runner, args=(rank, contexts[rank]), name=f"rank-{rank}")
        for rank in range(world_size)
    ]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    if world.failure is not None:
        if isinstance(world.failure, RankFailedError):
            raise world.failure from failures.get(world.failure.rank)
        raise world.failure
    return results


def frame_payload(payload) -> bytes:
    """Frame ``payload`` with an 8-byte little-endian length prefix (no cost)."""
    data = bytes(payload)
    return _LEN_PREFIX.pack(len(data)) + data


def encode_payload(ctx: RankContext, payload) -> bytes:
    """Frame ``payload`` and charge ``sigma * len(payload)`` to ``ctx``."""
    data = bytes(payload)
    ctx.advance(ctx.channel.sigma * len(data))
    return _LEN_PREFIX.pack(len(data)) + data


def decode_payload(ctx: RankContext, framed) -> bytes:
    """Strip and validate a frame; charge ``sigma * len(payload)`` to ``ctx``."""
    framed = bytes(framed)
    if len(framed) < _LEN_PREFIX.size:
        raise CorruptionError(f"framed payload too short: {len(framed)} bytes")
    (declared,) = _LEN_PREFIX.unpack_from(framed)
    body = framed[_LEN_PREFIX.size:]
    if len(body) != declared:
        raise CorruptionError(
            f"frame declares {declared} bytes but carries {len(body)}"
        )
    ctx.advance(ctx.channel.sigma * declared)
    return body
