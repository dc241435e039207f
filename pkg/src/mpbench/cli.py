"""Command-line entry point.

Runs one benchmark over the simulated transport (or the optional MPI adapter)
and renders a plain ASCII table on stdout. Exit codes: 0 success, 2 usage or
configuration errors, 1 runtime failures (deadlock, corruption, an ML run
whose distributed output does not match its baseline).
"""

import argparse
import os
import sys
from dataclasses import dataclass

from . import mlbench
from .benches import BenchReport, run_benchmark
from .core import (
    ALL_BENCHMARKS,
    BANDWIDTH_MBPS,
    ML_BENCHMARKS,
    POINT_TO_POINT,
    BenchConfig,
    MessageSizeSweep,
)
from .errors import (
    ConfigError,
    CorruptionError,
    DeadlockError,
    MeasurementError,
    RankFailedError,
)
from .mlbench import SpeedupResult
from .transport import ChannelModel

__all__ = ["CliArgs", "parse_args", "render_report", "render_speedup", "main"]

_LEGACY_BUFFERS = ("bytearray", "numpy", "cupy", "pycuda", "numba")


@dataclass(frozen=True)
class CliArgs:
    """Parsed and validated command-line options."""

    benchmark: str
    device: str
    buffer: str
    lower_limit: int
    upper_limit: int
    iterations: int
    warmup: int
    np: int
    alpha: float
    beta: float
    sigma: float
    seed: int
    transport: str
    dataset: str | None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpbench",
        description="Message-passing micro-benchmarks over a simulated "
        "alpha-beta transport.",
    )
    parser.add_argument(
        "--benchmark",
        required=True,
        choices=ALL_BENCHMARKS,
        metavar="NAME",
        help="one of: " + ", ".join(ALL_BENCHMARKS),
    )
    parser.add_argument("--device", default="cpu", help="cpu (gpu is not supported)")
    parser.add_argument(
        "--buffer", default="direct", help="buffer mode: direct or serialized"
    )
    parser.add_argument(
        "--lower-limit", type=int, default=1, help="smallest message size in bytes"
    )
    parser.add_argument(
        "--upper-limit", type=int, default=2**20, help="largest message size in bytes"
    )
    parser.add_argument(
        "--iterations", type=int, default=1000, help="timed iterations per size"
    )
    parser.add_argument(
        "--warm-up",
        dest="warmup",
        type=int,
        default=100,
        help="untimed iterations before the timed region",
    )
    parser.add_argument(
        "--np",
        type=int,
        default=None,
        help="rank count (default 2; collectives default 4)",
    )
    parser.add_argument(
        "--alpha", type=float, default=1.0, help="channel cost per message (us)"
    )
    parser.add_argument(
        "--beta", type=float, default=0.001, help="channel cost per byte (us/B)"
    )
    parser.add_argument(
        "--sigma",
        type=float,
        default=0.01,
        help="serialization cost per byte, serialized mode only (us/B)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="payload/data seed (default: MPBENCH_SEED env var, then 0)",
    )
    parser.add_argument(
        "--transport", choices=("sim", "mpi"), default="sim", help="transport backend"
    )
    parser.add_argument(
        "--dataset",
        default=None,
        help="CSV dataset for knn/kmeans_sweep (label in column 0, no header)",
    )
    return parser


def parse_args(argv) -> CliArgs:
    parser = build_parser()
    ns = parser.parse_args(argv)

    device = ns.device.lower()
    if device == "gpu":
        parser.error("--device gpu is unsupported in this build; only cpu is available")
    if device != "cpu":
        parser.error(f"--device must be cpu, got {ns.device!r}")

    buffer_mode = ns.buffer.lower()
    if buffer_mode in _LEGACY_BUFFERS:
        parser.error(
            f"--buffer {ns.buffer} names a buffer library; this build models "
            "buffers as 'direct' or 'serialized'"
        )
    if buffer_mode not in ("direct", "serialized"):
        parser.error(f"--buffer must be direct or serialized, got {ns.buffer!r}")

    seed = ns.seed
    if seed is None:
        raw = os.environ.get("MPBENCH_SEED", "0")
        try:
            seed = int(raw)
        except ValueError:
            parser.error(f"MPBENCH_SEED must be an integer, got {raw!r}")

    ranks = ns.np
    if ranks is None:
        ranks = 2 if ns.benchmark in POINT_TO_POINT + ML_BENCHMARKS else 4

    return CliArgs(
        benchmark=ns.benchmark,
        device=device,
        buffer=buffer_mode,
        lower_limit=ns.lower_limit,
        upper_limit=ns.upper_limit,
        iterations=ns.iterations,
        warmup=ns.warmup,
        np=ranks,
        alpha=ns.alpha,
        beta=ns.beta,
        sigma=ns.sigma,
        seed=seed,
        transport=ns.transport,
        dataset=ns.dataset,
    )


def _to_config(args: CliArgs) -> BenchConfig:
    return BenchConfig(
        benchmark=args.benchmark,
        np=args.np,
        iterations=args.iterations,
        warmup=args.warmup,
        sweep=MessageSizeSweep(args.lower_limit, args.upper_limit),
        buffer_mode=args.buffer,
        channel=ChannelModel(alpha=args.alpha, beta=args.beta, sigma=args.sigma),
        seed=args.seed,
    )


def render_report(report: BenchReport) -> str:
    """Fixed-width ASCII table; bit-stable for a given report."""
    lines = [f"# {report.benchmark}  np={report.np}  buffer={report.buffer_mode}"]
    if report.records[0].metric_kind == BANDWIDTH_MBPS:
        lines.append("# Size(B)  MB/s")
        for record in report.records:
            lines.append(f"{str(record.size):<12}  {record.value.avg_us:.2f}")
    else:
        lines.append("# Size(B)  Avg  Min  Max")
        for record in report.records:
            size_text = "-" if report.benchmark == "barrier" else str(record.size)
            stats = record.value
            lines.append(
                f"{size_text:<12}  {stats.avg_us:.2f}  {stats.min_us:.2f}  "
                f"{stats.max_us:.2f}"
            )
    return "\n".join(lines) + "\n"


def render_speedup(result: SpeedupResult, ranks: int, buffer_mode: str) -> str:
    flag = "true" if result.correct else "false"
    lines = [
        f"# {result.benchmark}  np={ranks}  buffer={buffer_mode}",
        "# Metric  Value",
        f"{'sequential_us':<16}  {result.sequential_us:.3f}",
        f"{'distributed_us':<16}  {result.distributed_us:.3f}",
        f"{'speedup':<16}  {result.speedup:.3f}",
        f"{'correct':<16}  {flag}",
    ]
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        cfg = _to_config(args)
        if args.transport == "mpi":
            from . import mpi_adapter

            report = mpi_adapter.run_mpi_benchmark(cfg)
            if report is not None:  # rank 0 renders; other ranks stay silent
                sys.stdout.write(render_report(report))
            return 0
        if cfg.benchmark in ML_BENCHMARKS:
            dataset = mlbench.load_csv(args.dataset) if args.dataset else None
            result = mlbench.run_ml_benchmark(cfg, dataset)
            sys.stdout.write(render_speedup(result, cfg.np, cfg.buffer_mode))
            if not result.correct:
                print(
                    "error: distributed output does not match the sequential baseline",
                    file=sys.stderr,
                )
                return 1
            return 0
        report = run_benchmark(cfg)
        sys.stdout.write(render_report(report))
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DeadlockError, CorruptionError, MeasurementError, RankFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
