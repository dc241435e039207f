"""Distributed ML benchmarks: k-NN, a k-means hyperparameter sweep, matmul.

Each benchmark has a sequential baseline and a distributed version whose
output must match the baseline bitwise. The distributed versions split work
by rows (k-NN test rows, matmul rows) or by k values (k-means) and combine
partial results with the collectives; all floating-point work happens in the
shared kernels with a fixed accumulation order, so the split cannot change
the arithmetic.

Simulated compute cost is injected with ``ctx.advance`` at a configurable
cost per flop; the sequential baseline is priced with the same flop counts,
which makes speedup curves reproducible.
"""

import struct
from dataclasses import dataclass
from math import inf

import numpy as np

from . import collectives, kernels
from .collectives import ReduceOp, VectorLayout
from .core import ML_BENCHMARKS, BenchConfig
from .errors import ConfigError
from .transport import RankContext, spawn_world

__all__ = [
    "Dataset",
    "SpeedupResult",
    "load_csv",
    "save_csv",
    "make_blobs",
    "make_matrices",
    "split_train_test",
    "knn_sequential",
    "knn_distributed",
    "kmeans_lloyd",
    "kmeans_sweep_sequential",
    "kmeans_sweep_distributed",
    "snake_assignment",
    "matmul_sequential",
    "matmul_distributed",
    "run_ml_benchmark",
]

# fixture defaults (also used by the CLI)
KNN_K = 5
KNN_POINTS = 500
KNN_FEATURES = 20
KNN_CLASSES = 3
TRAIN_FRACTION = 0.8
KMEANS_MAX_K = 16
KMEANS_POINTS = 400
KMEANS_FEATURES = 2
KMEANS_CLASSES = 4
KMEANS_MAX_ITER = 50
MATMUL_DIMS = (64, 48, 32)

_SUM_I64 = ReduceOp("sum", "int64")
_PAIR = struct.Struct("<qd")  # (k, inertia)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus optional integer class labels; treated as immutable."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ConfigError(f"features must be a nonempty 2-D matrix, got {features.shape}")
        object.__setattr__(self, "features", features)
        if self.labels is not None:
            labels = np.ascontiguousarray(self.labels, dtype=np.int64)
            if labels.shape != (features.shape[0],):
                raise ConfigError(
                    f"labels shape {labels.shape} does not match {features.shape[0]} rows"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def load_csv(path) -> Dataset:
    """Load a headerless CSV with the class label in column 0."""
    features, labels = [], []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise ConfigError(f"{path}:{lineno}: expected a label and features")
            try:
                labels.append(int(fields[0]))
                features.append([float(tok) for tok in fields[1:]])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: malformed row ({exc})") from exc
            if len(features[-1]) != len(features[0]):
                raise ConfigError(
                    f"{path}:{lineno}: row has {len(features[-1])} features, "
                    f"expected {len(features[0])}"
                )
    if not features:
        raise ConfigError(f"{path}: no data rows")
    return Dataset(np.array(features), np.array(labels))


def save_csv(dataset: Dataset, path) -> None:
    """Write label,feature... rows; floats keep full precision (repr)."""
    if dataset.labels is None:
        raise ConfigError("dataset has no labels to write")
    with open(path, "w", encoding="utf-8") as handle:
        for label, row in zip(dataset.labels, dataset.features):
            handle.write(",".join([str(int(label))] + [repr(float(v)) for v in row]))
            handle.write("\n")


def make_blobs(n: int, d: int, n_classes: int, seed: int) -> Dataset:
    """Seeded gaussian blobs, one cluster per class."""
    rng = np.random.default_rng([seed, n, d, n_classes])
    centers = rng.uniform(-10.0, 10.0, size=(n_classes, d))
    labels = rng.integers(0, n_classes, size=n)
    features = centers[labels] + rng.normal(0.0, 1.0, size=(n, d))
    return Dataset(features, labels)


def make_matrices(seed: int, dims=MATMUL_DIMS):
    """Seeded uniform matrices A (m x n) and B (n x p)."""
    m, n, p = dims
    rng = np.random.default_rng([seed, m, n, p])
    return rng.uniform(-1.0, 1.0, size=(m, n)), rng.uniform(-1.0, 1.0, size=(n, p))


def split_train_test(dataset: Dataset, fraction: float = TRAIN_FRACTION):
    """Deterministic split: first ``fraction`` of rows train, rest test."""
    cut = int(dataset.n * fraction)
    if cut < 1 or cut >= dataset.n:
        raise ConfigError(f"cannot split {dataset.n} rows at fraction {fraction}")
    labels = dataset.labels
    train = Dataset(dataset.features[:cut], None if labels is None else labels[:cut])
    test = Dataset(dataset.features[cut:], None if labels is None else labels[cut:])
    return train, test


def _block_range(n: int, world_size: int, rank: int):
    """Row block [lo, hi) for ``rank``; remainder rows go to the lowest ranks."""
    base, rem = divmod(n, world_size)
    lo = rank * base + min(rank, rem)
    return lo, lo + base + (1 if rank < rem else 0)


# ---------------------------------------------------------------------------
# k-nearest neighbors


def _check_knn(train: Dataset, test: Dataset, k: int):
    if train.labels is None or test.labels is None:
        raise ConfigError("k-NN needs labeled train and test datasets")
    if test.n < 1:
        raise ConfigError("k-NN test set is empty")
    if not 1 <= k <= train.n:
        raise ConfigError(f"k must be in [1, {train.n}], got {k}")
    if train.d != test.d:
        raise ConfigError(f"feature widths differ: {train.d} vs {test.d}")


def _knn_flops(test_rows: int, train_rows: int, d: int) -> int:
    return 3 * d * train_rows * test_rows


def knn_sequential(train: Dataset, test: Dataset, k: int) -> float:
    """Classification accuracy of k-NN (squared euclidean, majority vote)."""
    _check_knn(train, test, k)
    preds = kernels.knn_predict(train.features, train.labels, test.features, k)
    return int((preds == test.labels).sum()) / test.n


def knn_distributed(ctx: RankContext, train: Dataset, test: Dataset, k: int,
                    flop_cost: float = 0.0) -> float | None:
    """Accuracy at rank 0: test rows split by rank, correct counts reduced.

    Reducing integer counts (not per-rank accuracies) keeps the result exactly
    equal to the sequential accuracy under uneven splits.
    """
    _check_knn(train, test, k)
    if ctx.world_size > test.n:
        raise ConfigError(
            f"world size {ctx.world_size} exceeds {test.n} test rows"
        )
    lo, hi = _block_range(test.n, ctx.world_size, ctx.rank)
    preds = kernels.knn_predict(train.features, train.labels, test.features[lo:hi], k)
    correct = int((preds == test.labels[lo:hi]).sum())
    ctx.advance(_knn_flops(hi - lo, train.n, train.d) * flop_cost)
    total = collectives.reduce(ctx, struct.pack("<q", correct), _SUM_I64, root=0)
    if ctx.rank != 0:
        return None
    return struct.unpack("<q", total)[0] / test.n


# ---------------------------------------------------------------------------
# k-means hyperparameter sweep


def _lloyd(points: np.ndarray, k: int, max_iter: int):
    """Lloyd iterations with deterministic strided init; returns (inertia, flops).

    Init takes centroid j from data row floor(j * n / k). An empty cluster is
    re-seeded to the point currently farthest from its own centroid (processed
    in ascending cluster order, each point used at most once). Stops when the
    assignment repeats or after ``max_iter`` iterations; inertia comes from a
    final assignment pass against the final centroids.
    """
    n, d = points.shape
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")
    centroids = points[[(j * n) // k for j in range(k)]].copy()
    previous = None
    flops = 0
    for _ in range(max_iter):
        assign, dmin = kernels.kmeans_assign(points, centroids)
        flops += 3 * n * k * d
        counts = np.bincount(assign, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            farthest = int(np.argmax(dmin))
            centroids[empty] = points[farthest]
            assign[farthest] = empty
            dmin = dmin.copy()
            dmin[farthest] = -1.0
        if previous is not None and np.array_equal(assign, previous):
            break
        previous = assign
        sums, counts = kernels.kmeans_accumulate(points, assign, k)
        flops += n * d
        refreshed = centroids.copy()
        nonzero = counts > 0
        refreshed[nonzero] = sums[nonzero] / counts[nonzero][:, None]
        centroids = refreshed
    assign, dmin = kernels.kmeans_assign(points, centroids)
    flops += 3 * n * k * d
    inertia = 0.0
    for value in dmin:  # sequential sum, identical on both kernel paths
        inertia += float(value)
    return inertia, flops


def kmeans_lloyd(points, k: int, max_iter: int = KMEANS_MAX_ITER) -> float:
    """Inertia of deterministic Lloyd k-means on ``points``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    return _lloyd(points, k, max_iter)[0]


def snake_assignment(total_k: int, world_size: int) -> list[list[int]]:
    """Deal k = total_k .. 1 over ranks boustrophedon (0..P-1, P-1..0, ...).

    Costly (large) k values land first, so with cost ~ k every pair of passes
    adds the same total to each rank.
    """
    if total_k < 1:
        raise ConfigError(f"total_k must be >= 1, got {total_k}")
    if world_size < 1:
        raise ConfigError(f"world_size must be >= 1, got {world_size}")
    assignment = [[] for _ in range(world_size)]
    period = 2 * world_size
    for i, k in enumerate(range(total_k, 0, -1)):
        pos = i % period
        rank = pos if pos < world_size else period - 1 - pos
        assignment[rank].append(k)
    return assignment


def _sweep_inertias(points: np.ndarray, ks, max_iter: int):
    inertias, flops = [], 0
    for k in ks:
        inertia, cost = _lloyd(points, k, max_iter)
        inertias.append(inertia)
        flops += cost
    return inertias, flops


def kmeans_sweep_sequential(points, max_k: int, max_iter: int = KMEANS_MAX_ITER) -> list[float]:
    """Inertia for every k in 1..max_k, in k order."""
    if max_k < 1:
        raise ConfigError(f"max_k must be >= 1, got {max_k}")
    points = np.ascontiguousarray(points, dtype=np.float64)
    return _sweep_inertias(points, range(1, max_k + 1), max_iter)[0]


def kmeans_sweep_distributed(ctx: RankContext, points, max_k: int,
                             max_iter: int = KMEANS_MAX_ITER,
                             flop_cost: float = 0.0) -> list[float] | None:
    """Snake-assigned sweep; (k, inertia) pairs gathered and ordered at rank 0."""
    if max_k < 1:
        raise ConfigError(f"max_k must be >= 1, got {max_k}")
    points = np.ascontiguousarray(points, dtype=np.float64)
    assignment = snake_assignment(max_k, ctx.world_size)
    inertias, flops = _sweep_inertias(points, assignment[ctx.rank], max_iter)
    ctx.advance(flops * flop_cost)
    payload = b"".join(
        _PAIR.pack(k, inertia)
        for k, inertia in zip(assignment[ctx.rank], inertias)
    )
    layout = VectorLayout.contiguous([_PAIR.size * len(ks) for ks in assignment])
    gathered = collectives.gatherv(ctx, payload, layout, root=0)
    if ctx.rank != 0:
        return None
    by_k = {}
    for offset in range(0, len(gathered), _PAIR.size):
        k, inertia = _PAIR.unpack_from(gathered, offset)
        by_k[k] = inertia
    return [by_k[k] for k in range(1, max_k + 1)]


# ---------------------------------------------------------------------------
# matrix multiplication


def _check_matmul(a: np.ndarray, b: np.ndarray):
    if a.ndim != 2 or b.ndim != 2:
        raise ConfigError("matmul operands must be 2-D")
    if a.shape[1] != b.shape[0]:
        raise ConfigError(f"inner dimensions disagree: {a.shape} x {b.shape}")


def matmul_sequential(a, b) -> np.ndarray:
    """Row-wise triple-loop product with fixed accumulation order."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    _check_matmul(a, b)
    return kernels.matmul_rows(a, b)


def matmul_distributed(ctx: RankContext, a, b, flop_cost: float = 0.0) -> np.ndarray | None:
    """Row blocks computed per rank and gathered at rank 0."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    _check_matmul(a, b)
    m, n = a.shape
    p = b.shape[1]
    lo, hi = _block_range(m, ctx.world_size, ctx.rank)
    block = kernels.matmul_rows(a[lo:hi], b)
    ctx.advance(2 * (hi - lo) * n * p * flop_cost)
    byte_counts = []
    for rank in range(ctx.world_size):
        rlo, rhi = _block_range(m, ctx.world_size, rank)
        byte_counts.append((rhi - rlo) * p * 8)
    layout = VectorLayout.contiguous(byte_counts)
    gathered = collectives.gatherv(ctx, block.tobytes(), layout, root=0)
    if ctx.rank != 0:
        return None
    return np.frombuffer(gathered, dtype=np.float64).reshape(m, p).copy()


# ---------------------------------------------------------------------------
# speedup harness


@dataclass(frozen=True)
class SpeedupResult:
    """Sequential vs distributed timing plus the exact-match flag."""

    benchmark: str
    sequential_us: float
    distributed_us: float
    speedup: float
    correct: bool


def _outputs_match(benchmark: str, sequential, distributed) -> bool:
    if benchmark == "knn":
        return sequential == distributed
    if benchmark == "kmeans_sweep":
        return len(sequential) == len(distributed) and all(
            s == d for s, d in zip(sequential, distributed)
        )
    return (
        sequential.shape == distributed.shape
        and sequential.tobytes() == distributed.tobytes()
    )


def run_ml_benchmark(cfg: BenchConfig, dataset: Dataset | None = None) -> SpeedupResult:
    """Run the sequential baseline, then the distributed version in a world.

    Distributed time is the final-clock makespan across ranks; compute cost is
    charged at ``cfg.flop_cost`` microseconds per flop on both sides.
    """
    if cfg.benchmark not in ML_BENCHMARKS:
        raise ConfigError(f"{cfg.benchmark!r} is not an ML benchmark")

    if cfg.benchmark == "knn":
        source = dataset or make_blobs(KNN_POINTS, KNN_FEATURES, KNN_CLASSES, cfg.seed)
        train, test = split_train_test(source)
        if cfg.np > test.n:
            raise ConfigError(f"np {cfg.np} exceeds {test.n} k-NN test rows")
        sequential = knn_sequential(train, test, KNN_K)
        seq_flops = _knn_flops(test.n, train.n, train.d)

        def program(ctx):
            result = knn_distributed(ctx, train, test, KNN_K, cfg.flop_cost)
            return result, ctx.now()

    elif cfg.benchmark == "kmeans_sweep":
        if dataset is not None:
            points = dataset.features
        else:
            points = make_blobs(
                KMEANS_POINTS, KMEANS_FEATURES, KMEANS_CLASSES, cfg.seed
            ).features
        sequential, seq_flops = _sweep_inertias(
            points, range(1, KMEANS_MAX_K + 1), KMEANS_MAX_ITER
        )

        def program(ctx):
            result = kmeans_sweep_distributed(
                ctx, points, KMEANS_MAX_K, KMEANS_MAX_ITER, cfg.flop_cost
            )
            return result, ctx.now()

    else:  # matmul
        a, b = make_matrices(cfg.seed)
        sequential = matmul_sequential(a, b)
        seq_flops = 2 * a.shape[0] * a.shape[1] * b.shape[1]

        def program(ctx):
            result = matmul_distributed(ctx, a, b, cfg.flop_cost)
            return result, ctx.now()

    results = spawn_world(cfg.np, cfg.channel, program)
    distributed = results[0][0]
    distributed_us = max(clock for _, clock in results)
    sequential_us = seq_flops * cfg.flop_cost
    speedup = sequential_us / distributed_us if distributed_us > 0 else inf
    return SpeedupResult(
        benchmark=cfg.benchmark,
        sequential_us=sequential_us,
        distributed_us=distributed_us,
        speedup=speedup,
        correct=_outputs_match(cfg.benchmark, sequential, distributed),
    )
