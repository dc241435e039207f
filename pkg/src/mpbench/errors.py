"""Exception types shared across the package.

Configuration and usage mistakes raise :class:`ConfigError` (CLI exit code 2).
Everything that can only surface while a benchmark is running -- deadlock,
corrupt frames, broken measurements, a crashed rank -- maps to exit code 1.
"""

__all__ = [
    "ConfigError",
    "MeasurementError",
    "CorruptionError",
    "DeadlockError",
    "RankFailedError",
]


class ConfigError(ValueError):
    """Invalid configuration or API usage."""


class MeasurementError(ValueError):
    """A measured quantity is unusable (e.g. non-positive elapsed time)."""


class CorruptionError(RuntimeError):
    """Received bytes do not match the declared framing or length."""


class DeadlockError(RuntimeError):
    """Every unfinished rank is blocked in recv with no deliverable message."""

    def __init__(self, blocked_ranks):
        self.blocked_ranks = tuple(sorted(blocked_ranks))
        super().__init__(
            "deadlock: ranks %s blocked in recv with empty matching queues"
            % (list(self.blocked_ranks),)
        )


class RankFailedError(RuntimeError):
    """A rank's program raised; the world was aborted."""

    def __init__(self, rank, original):
        self.rank = rank
        self.original = original
        super().__init__(f"rank {rank} failed: {original!r}")
