import pytest

from mpbench.benches import BenchReport
from mpbench.cli import main, parse_args, render_report
from mpbench.core import (
    BANDWIDTH_MBPS,
    LATENCY_US,
    BenchRecord,
    SampleStats,
)

FAST = ["--iterations", "3", "--warm-up", "1", "--upper-limit", "8"]


class TestParseArgs:
    def test_defaults(self):
        args = parse_args(["--benchmark", "latency"])
        assert args.benchmark == "latency"
        assert args.device == "cpu"
        assert args.buffer == "direct"
        assert args.lower_limit == 1
        assert args.upper_limit == 2**20
        assert args.iterations == 1000
        assert args.warmup == 100
        assert args.np == 2
        assert (args.alpha, args.beta, args.sigma) == (1.0, 0.001, 0.01)
        assert args.seed == 0
        assert args.transport == "sim"
        assert args.dataset is None

    def test_collective_default_np(self):
        assert parse_args(["--benchmark", "allreduce"]).np == 4
        assert parse_args(["--benchmark", "gatherv"]).np == 4
        assert parse_args(["--benchmark", "mult_lat"]).np == 2

    def test_flag_mapping(self):
        args = parse_args(
            ["--benchmark", "allreduce", "--np", "8", "--lower-limit", "4",
             "--upper-limit", "64"]
        )
        assert args.np == 8
        assert (args.lower_limit, args.upper_limit) == (4, 64)

    def test_unknown_benchmark_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            parse_args(["--benchmark", "latenzy"])
        assert excinfo.value.code == 2
        assert "latency" in capsys.readouterr().err  # lists valid names

    def test_gpu_device_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            parse_args(["--benchmark", "latency", "--device", "GPU"])
        assert excinfo.value.code == 2
        assert "unsupported" in capsys.readouterr().err

    def test_cpu_device_case_insensitive(self):
        assert parse_args(["--benchmark", "latency", "--device", "CPU"]).device == "cpu"

    @pytest.mark.parametrize("name", ["bytearray", "numpy", "cupy", "pycuda", "numba"])
    def test_library_buffer_names_redirected(self, name, capsys):
        with pytest.raises(SystemExit) as excinfo:
            parse_args(["--benchmark", "latency", "--buffer", name])
        assert excinfo.value.code == 2
        err = capsys.readouterr().err
        assert "direct" in err and "serialized" in err

    def test_seed_env_fallback(self, monkeypatch):
        monkeypatch.setenv("MPBENCH_SEED", "77")
        assert parse_args(["--benchmark", "latency"]).seed == 77

    def test_seed_flag_overrides_env(self, monkeypatch):
        monkeypatch.setenv("MPBENCH_SEED", "77")
        assert parse_args(["--benchmark", "latency", "--seed", "5"]).seed == 5

    def test_bad_seed_env_exits_2(self, monkeypatch, capsys):
        monkeypatch.setenv("MPBENCH_SEED", "not-a-number")
        with pytest.raises(SystemExit) as excinfo:
            parse_args(["--benchmark", "latency"])
        assert excinfo.value.code == 2


def _latency_report(*sizes_values):
    records = tuple(
        BenchRecord(size, LATENCY_US, SampleStats(v, v, v)) for size, v in sizes_values
    )
    return BenchReport("latency", "direct", 2, records)


class TestRenderReport:
    def test_latency_row_format(self):
        text = render_report(_latency_report((1024, 2.024)))
        assert text == (
            "# latency  np=2  buffer=direct\n"
            "# Size(B)  Avg  Min  Max\n"
            "1024          2.02  2.02  2.02\n"
        )

    def test_bandwidth_row_format(self):
        record = BenchRecord(65536, BANDWIDTH_MBPS, SampleStats(2048.0, 2048.0, 2048.0))
        text = render_report(BenchReport("bw", "direct", 2, (record,)))
        assert text == (
            "# bw  np=2  buffer=direct\n"
            "# Size(B)  MB/s\n"
            "65536         2048.00\n"
        )

    def test_barrier_size_token(self):
        record = BenchRecord(0, LATENCY_US, SampleStats(1.0, 1.0, 1.0))
        text = render_report(BenchReport("barrier", "direct", 4, (record,)))
        assert text.splitlines()[-1] == "-             1.00  1.00  1.00"


class TestMain:
    def test_latency_run_exit_zero(self, capsys):
        assert main(["--benchmark", "latency"] + FAST) == 0
        out = capsys.readouterr().out
        assert out.startswith("# latency  np=2  buffer=direct\n")
        assert len(out.splitlines()) == 2 + 4  # header lines + sizes 1,2,4,8

    def test_np_constraint_exit_two(self, capsys):
        assert main(["--benchmark", "latency", "--np", "3"] + FAST) == 2
        assert "np = 2" in capsys.readouterr().err

    def test_inverted_sweep_exit_two(self, capsys):
        code = main(["--benchmark", "latency", "--lower-limit", "64",
                     "--upper-limit", "8"])
        assert code == 2

    def test_identical_argv_identical_stdout(self, capsys):
        argv = ["--benchmark", "alltoall", "--np", "3"] + FAST
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first

    def test_ml_run_prints_speedup(self, capsys):
        assert main(["--benchmark", "matmul", "--np", "2", "--alpha", "0",
                     "--beta", "0"]) == 0
        out = capsys.readouterr().out
        assert "speedup" in out
        assert "correct           true" in out

    def test_ml_dataset_csv(self, capsys, tmp_path):
        from mpbench.mlbench import make_blobs, save_csv

        path = tmp_path / "ds.csv"
        save_csv(make_blobs(60, 3, 2, seed=2), path)
        assert main(["--benchmark", "knn", "--np", "2", "--dataset", str(path)]) == 0
        assert "correct           true" in capsys.readouterr().out

    def test_ml_mismatch_exit_one(self, capsys, monkeypatch):
        from mpbench import cli, mlbench

        real = mlbench.run_ml_benchmark

        def corrupted(cfg, dataset=None):
            result = real(cfg, dataset)
            return type(result)(
                benchmark=result.benchmark,
                sequential_us=result.sequential_us,
                distributed_us=result.distributed_us,
                speedup=result.speedup,
                correct=False,
            )

        monkeypatch.setattr(cli.mlbench, "run_ml_benchmark", corrupted)
        assert main(["--benchmark", "matmul", "--np", "2"]) == 1
        captured = capsys.readouterr()
        assert "does not match" in captured.err

    def test_serialized_buffer_accepted(self, capsys):
        assert main(["--benchmark", "latency", "--buffer", "serialized"] + FAST) == 0
        assert "buffer=serialized" in capsys.readouterr().out
