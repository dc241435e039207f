import pytest

from mpbench.benches import (
    BenchReport,
    _bibw_program,
    run_bandwidth,
    run_benchmark,
    run_bibw,
    run_collective,
    run_latency,
    run_mult_lat,
)
from mpbench.core import (
    BANDWIDTH_MBPS,
    LATENCY_US,
    BenchConfig,
    MessageSizeSweep,
    sweep_sizes,
)
from mpbench.errors import ConfigError
from mpbench.mlbench import SpeedupResult
from mpbench.transport import ChannelModel, spawn_world


def config(benchmark, **overrides):
    defaults = dict(
        benchmark=benchmark,
        np=2,
        iterations=5,
        warmup=2,
        sweep=MessageSizeSweep(1, 64),
        channel=ChannelModel(1.0, 0.001, 0.0),
        seed=0,
    )
    defaults.update(overrides)
    return BenchConfig(**defaults)


def assert_reports_close(left, right, rel=1e-9):
    """Same structure; metric values equal within ``rel`` (timed regions at
    different absolute clock offsets round differently in the last ulp)."""
    assert [r.size for r in left.records] == [r.size for r in right.records]
    for rec_l, rec_r in zip(left.records, right.records):
        assert rec_l.metric_kind == rec_r.metric_kind
        assert rec_l.value.avg_us == pytest.approx(rec_r.value.avg_us, rel=rel)
        assert rec_l.value.min_us == pytest.approx(rec_r.value.min_us, rel=rel)
        assert rec_l.value.max_us == pytest.approx(rec_r.value.max_us, rel=rel)


class TestLatency:
    def test_analytic_alpha_beta(self):
        alpha, beta = 1.0, 0.001
        report = run_latency(
            config("latency", sweep=MessageSizeSweep(1, 4096),
                   channel=ChannelModel(alpha, beta, 0.0))
        )
        for record in report.records:
            expected = alpha + beta * record.size
            assert record.value.avg_us == pytest.approx(expected, rel=1e-9)
            assert record.value.min_us == record.value.avg_us == record.value.max_us

    def test_free_channel_is_zero(self):
        report = run_latency(config("latency", channel=ChannelModel(0.0, 0.0, 0.0)))
        assert all(record.value.avg_us == 0.0 for record in report.records)

    def test_serialized_hand_simulation(self):
        # sigma=0.01, 1000 B, alpha=1, beta=0: 1 + encode 10 + decode 10 = 21
        report = run_latency(
            config(
                "latency",
                sweep=MessageSizeSweep(1000, 1000),
                buffer_mode="serialized",
                channel=ChannelModel(1.0, 0.0, 0.01),
            )
        )
        assert report.records[0].value.avg_us == pytest.approx(21.0, rel=1e-12)

    def test_serialization_overhead_law(self):
        # serialized - direct = 2 * sigma * n per one-way latency (beta = 0)
        sigma = 0.01
        sweep = MessageSizeSweep(1, 2**10)
        direct = run_latency(
            config("latency", sweep=sweep, channel=ChannelModel(1.0, 0.0, sigma))
        )
        serialized = run_latency(
            config("latency", sweep=sweep, buffer_mode="serialized",
                   channel=ChannelModel(1.0, 0.0, sigma))
        )
        for rec_d, rec_s in zip(direct.records, serialized.records):
            overhead = rec_s.value.avg_us - rec_d.value.avg_us
            assert overhead == pytest.approx(2 * sigma * rec_d.size, rel=1e-9)

    def test_warmup_neutral(self):
        without = run_latency(config("latency", warmup=0))
        with_warmup = run_latency(config("latency", warmup=10))
        assert_reports_close(without, with_warmup)

    def test_monotone_in_size(self):
        report = run_latency(config("latency", sweep=MessageSizeSweep(1, 2**12)))
        values = [record.value.avg_us for record in report.records]
        assert values == sorted(values)

    def test_wrong_benchmark_rejected(self):
        with pytest.raises(ConfigError):
            run_latency(config("bw"))


class TestBandwidth:
    def test_analytic_window_formula(self):
        # per iteration the sender's clock advances 2*alpha + beta*(n + 4)
        alpha, beta, window = 0.7, 0.002, 8
        cfg = config(
            "bw",
            sweep=MessageSizeSweep(4, 1024),
            channel=ChannelModel(alpha, beta, 0.0),
            window_size=window,
        )
        report = run_bandwidth(cfg)
        for record in report.records:
            expected = window * record.size / (2 * alpha + beta * (record.size + 4))
            assert record.value.avg_us == pytest.approx(expected, rel=1e-9)
            assert record.metric_kind == BANDWIDTH_MBPS

    def test_window_one_acked_messages(self):
        # W=1 degenerates to size / (alpha + beta*size + ack time)
        alpha, beta = 1.0, 0.001
        cfg = config(
            "bw",
            sweep=MessageSizeSweep(64, 64),
            channel=ChannelModel(alpha, beta, 0.0),
            window_size=1,
        )
        record = run_bandwidth(cfg).records[0]
        ack_time = alpha + beta * 4
        expected = 64 / (alpha + beta * 64 + ack_time)
        assert record.value.avg_us == pytest.approx(expected, rel=1e-9)

    def test_zero_beta_grows_linearly(self):
        cfg = config("bw", sweep=MessageSizeSweep(1, 256), channel=ChannelModel(1.0, 0.0, 0.0))
        values = [r.value.avg_us for r in run_bandwidth(cfg).records]
        for prev, cur in zip(values, values[1:]):
            assert cur == pytest.approx(2 * prev, rel=1e-9)

    def test_free_channel_guarded(self):
        cfg = config("bw", channel=ChannelModel(0.0, 0.0, 0.0))
        assert all(r.value.avg_us == 0.0 for r in run_bandwidth(cfg).records)

    def test_warmup_neutral(self):
        assert_reports_close(
            run_bandwidth(config("bw", warmup=0)),
            run_bandwidth(config("bw", warmup=10)),
        )


class TestBibw:
    def test_twice_one_direction(self):
        cfg = config("bibw", sweep=MessageSizeSweep(8, 512))
        bw_cfg = config("bw", sweep=MessageSizeSweep(8, 512))
        bibw = run_bibw(cfg)
        bw = run_bandwidth(bw_cfg)
        for rec_bi, rec_bw in zip(bibw.records, bw.records):
            assert rec_bi.value.avg_us == pytest.approx(
                2 * rec_bw.value.avg_us, rel=1e-9
            )

    def test_one_sided_window_reduces_to_bw(self):
        cfg = config("bibw", sweep=MessageSizeSweep(8, 128))
        results = spawn_world(
            2, cfg.channel, lambda ctx: _bibw_program(ctx, cfg, windows=(cfg.window_size, 0))
        )
        one_sided = results[0]
        bw = run_bandwidth(config("bw", sweep=MessageSizeSweep(8, 128))).records
        for rec_one, rec_bw in zip(one_sided, bw):
            assert rec_one.value.avg_us == pytest.approx(rec_bw.value.avg_us, rel=1e-9)

    def test_free_channel_guarded(self):
        cfg = config("bibw", channel=ChannelModel(0.0, 0.0, 0.0))
        assert all(r.value.avg_us == 0.0 for r in run_bibw(cfg).records)


class TestMultLat:
    def test_two_ranks_identical_to_latency(self):
        mult = run_mult_lat(config("mult_lat"))
        plain = run_latency(config("latency"))
        assert_reports_close(mult, plain)

    def test_homogeneous_pairs_agree(self):
        report = run_mult_lat(config("mult_lat", np=4))
        for record in report.records:
            assert record.value.min_us == pytest.approx(record.value.max_us, rel=1e-9)
            assert record.value.avg_us == pytest.approx(record.value.min_us, rel=1e-9)

    def test_pairs_match_analytic(self):
        alpha, beta = 2.0, 0.005
        report = run_mult_lat(
            config("mult_lat", np=6, channel=ChannelModel(alpha, beta, 0.0),
                   sweep=MessageSizeSweep(16, 256))
        )
        for record in report.records:
            assert record.value.avg_us == pytest.approx(
                alpha + beta * record.size, rel=1e-9
            )


class TestCollectiveBench:
    def test_barrier_single_record(self):
        report = run_collective(
            config("barrier", channel=ChannelModel(1.0, 0.0, 0.0), warmup=0)
        )
        assert len(report.records) == 1
        assert report.records[0].value.avg_us == pytest.approx(1.0, rel=1e-12)

    def test_bcast_two_ranks_single_call(self):
        # one binomial edge: non-root completes one-way transfer (max stat)
        alpha, beta, size = 1.0, 0.001, 256
        report = run_collective(
            config(
                "bcast",
                iterations=1,
                warmup=0,
                sweep=MessageSizeSweep(size, size),
                channel=ChannelModel(alpha, beta, 0.0),
            )
        )
        record = report.records[0]
        assert record.value.max_us == pytest.approx(alpha + beta * size, rel=1e-9)
        assert record.value.avg_us == pytest.approx((alpha + beta * size) / 2, rel=1e-9)

    @pytest.mark.parametrize(
        "name",
        [
            "allgather",
            "allreduce",
            "alltoall",
            "bcast",
            "gather",
            "reduce",
            "reduce_scatter",
            "scatter",
            "allgatherv",
            "alltoallv",
            "gatherv",
            "scatterv",
        ],
    )
    def test_record_structure(self, name):
        cfg = config(name, np=4, iterations=2, warmup=1, sweep=MessageSizeSweep(8, 64))
        report = run_collective(cfg)
        assert [r.size for r in report.records] == sweep_sizes(cfg.sweep)
        for record in report.records:
            assert record.metric_kind == LATENCY_US
            assert record.value.min_us <= record.value.avg_us <= record.value.max_us

    def test_serialized_mode_adds_cost(self):
        sweep = MessageSizeSweep(256, 1024)
        direct = run_collective(config("allgather", np=3, sweep=sweep))
        serialized = run_collective(
            config(
                "allgather", np=3, sweep=sweep, buffer_mode="serialized",
                channel=ChannelModel(1.0, 0.001, 0.01),
            )
        )
        for rec_d, rec_s in zip(direct.records, serialized.records):
            assert rec_s.value.avg_us > rec_d.value.avg_us

    def test_p2p_name_rejected(self):
        with pytest.raises(ConfigError):
            run_collective(config("latency"))


class TestDispatcher:
    def test_routes_latency(self):
        cfg = config("latency")
        assert run_benchmark(cfg) == run_latency(cfg)

    def test_routes_ml(self):
        cfg = BenchConfig(benchmark="matmul", np=2, channel=ChannelModel(0, 0, 0))
        result = run_benchmark(cfg)
        assert isinstance(result, SpeedupResult)
        assert result.correct

    def test_repeated_invocations_bit_identical(self):
        cfg = config("allreduce", np=4)
        first = run_benchmark(cfg)
        second = run_benchmark(cfg)
        assert isinstance(first, BenchReport)
        assert first == second
