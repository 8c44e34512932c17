from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from teleop.harness.cli import main as bench_main
from teleop.harness.latency import (
    IMPAIRMENT_PROFILES,
    LatencyReport,
    measure_dispatch_overhead,
    run_latency_experiment,
)
from teleop.harness.report import emit_report, sparkline
from teleop.harness.tracking import load_trajectory_script, run_tracking_scenario
from teleop.transport.impair import ImpairmentConfig


def bypass_script() -> str:
    return str(resources.files("teleop").joinpath("data/scripts/construction_site_bypass.csv"))


def step_script() -> str:
    return str(resources.files("teleop").joinpath("data/scripts/step_velocity.ndjson"))


class TestDispatchOverhead:
    def test_overhead_well_under_a_millisecond(self):
        assert measure_dispatch_overhead(500) < 1.0


class TestLockstepLatency:
    def test_deterministic_byte_identical_exports(self, tmp_path):
        cfg = ImpairmentConfig(15.49, 1.81, seed=42)
        report_a = run_latency_experiment("udp", cfg, rate_hz=10.0, n=500, mode="lockstep")
        report_b = run_latency_experiment("udp", cfg, rate_hz=10.0, n=500, mode="lockstep")
        paths_a = emit_report(report_a, ("csv",), tmp_path / "a")
        paths_b = emit_report(report_b, ("csv",), tmp_path / "b")
        assert paths_a[0].read_bytes() == paths_b[0].read_bytes()

    def test_mean_tracks_configured_profile(self):
        report = run_latency_experiment("udp", ImpairmentConfig(15.49, 1.81, seed=3), n=1000, mode="lockstep")
        assert report.mean_ms == pytest.approx(15.49, abs=0.5)
        assert report.stddev_ms == pytest.approx(1.81, rel=0.25)
        assert report.overhead_fraction <= 0.10

    def test_tcp_head_of_line_blocking_p99(self):
        # 2% datagram-equivalent stalls: TCP converts drops into stream
        # stalls, so its p99 must sit at or above UDP's
        udp = run_latency_experiment(
            "udp", ImpairmentConfig(15.49, 1.81, loss_probability=0.02, seed=9), rate_hz=50.0, n=2000,
            mode="lockstep",
        )
        tcp = run_latency_experiment(
            "tcp", ImpairmentConfig(15.55, 2.37, loss_probability=0.02, seed=9), rate_hz=50.0, n=2000,
            mode="lockstep",
        )
        assert tcp.p99_ms >= udp.p99_ms
        assert udp.lost_count > 0
        assert tcp.lost_count == 0  # TCP loses nothing

    def test_report_requires_hundred_samples(self):
        with pytest.raises(ValueError, match="n >= 100"):
            run_latency_experiment("udp", ImpairmentConfig(1.0, 0.0, seed=1), n=50, mode="lockstep")


class TestRealtimeLatency:
    def test_loopback_decomposition_closes(self):
        # mean = overhead + network portion within 5% on an impaired loopback
        cfg = ImpairmentConfig(10.0, 1.0, seed=6)
        report = run_latency_experiment("udp", cfg, rate_hz=100.0, n=300, mode="realtime")
        assert report.n == 300
        closure = abs(report.mean_ms - (report.overhead_mean_ms + report.applied_delay_mean_ms))
        assert closure <= 0.05 * report.mean_ms
        assert report.mean_ms == pytest.approx(10.0, abs=0.6)

    def test_tcp_realtime_small_run(self):
        cfg = ImpairmentConfig(5.0, 0.5, seed=8)
        report = run_latency_experiment("tcp", cfg, rate_hz=100.0, n=200, mode="realtime")
        assert report.mean_ms == pytest.approx(5.0, abs=0.6)
        assert report.lost_count == 0


class TestTrackingScenarios:
    def test_bypass_trajectory_crosses_construction_site(self, tmp_path):
        report = run_tracking_scenario("trajectory", "construction_site", bypass_script(), out_dir=tmp_path)
        assert report.goal_reached
        assert report.cross_track_max < 0.3
        for path in report.csv_paths:
            assert Path(path).exists()

    def test_series_lengths_equal_after_resampling(self, tmp_path):
        report = run_tracking_scenario(
            "direct", "construction_site", step_script(), out_dir=tmp_path, duration_limit_s=5.0
        )
        velocity = Path(report.csv_paths[0]).read_text().splitlines()
        steering = Path(report.csv_paths[1]).read_text().splitlines()
        assert len(velocity) == len(steering)
        # each row holds both desired and actual on the common tick grid
        assert velocity[0] == "t_ms,desired_mps,actual_mps"

    def test_zero_input_script_keeps_vehicle_stationary(self, tmp_path):
        script = tmp_path / "zero.ndjson"
        script.write_text('{"t_ms": 0, "steering_axis": 0.0, "throttle_axis": 0.0, "brake_axis": 0.0}\n')
        report = run_tracking_scenario(
            "direct", "construction_site", script, out_dir=tmp_path, duration_limit_s=5.0
        )
        assert not report.goal_reached  # flagged incomplete, metrics still present
        assert report.velocity_rms == pytest.approx(0.0, abs=1e-9)
        assert report.steering_rms == pytest.approx(0.0, abs=1e-9)

    def test_lockstep_tracking_byte_identical(self, tmp_path):
        run_tracking_scenario("trajectory", "construction_site", bypass_script(),
                              out_dir=tmp_path / "a", duration_limit_s=40.0)
        run_tracking_scenario("trajectory", "construction_site", bypass_script(),
                              out_dir=tmp_path / "b", duration_limit_s=40.0)
        for name in ("trajectory_construction_site_velocity.csv", "trajectory_construction_site_path.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_invalid_scripted_trajectory_rejected(self, tmp_path):
        script = tmp_path / "bad.csv"
        script.write_text("x_m,y_m,v_mps\n0,0,2\n1,0,2\n")  # nonzero terminal velocity
        with pytest.raises(ValueError, match="invalid"):
            run_tracking_scenario("trajectory", "construction_site", script, out_dir=tmp_path)


class TestReportEmission:
    def _report(self) -> LatencyReport:
        return run_latency_experiment("udp", ImpairmentConfig(5.0, 1.0, seed=13), n=200, mode="lockstep")

    def test_text_format_single_readable_file(self, tmp_path):
        paths = emit_report(self._report(), ("text",), tmp_path)
        text = paths[0].read_text()
        assert "one-way latency" in text
        assert "distribution" in text

    def test_csv_one_row_per_sample_plus_summary(self, tmp_path):
        report = self._report()
        paths = emit_report(report, ("csv",), tmp_path)
        lines = paths[0].read_text().splitlines()
        assert lines[0] == "index,latency_ms"
        assert len(lines) == 1 + report.n + 5  # header + samples + summary block
        assert lines[-5].startswith("mean,")

    def test_json_lines_carries_overhead(self, tmp_path):
        paths = emit_report(self._report(), ("json-lines",), tmp_path)
        data = json.loads(paths[0].read_text())
        assert "overhead_mean_ms" in data
        assert data["impairment"]["one_way_delay_mean_ms"] == 5.0

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(self._report(), ("yaml",), tmp_path)

    def test_sparkline_shape(self):
        assert sparkline([1.0] * 10).startswith("▁")
        assert len(sparkline(list(range(100)), bins=16)) == 16


class TestCli:
    def test_latency_lockstep_subcommand(self, tmp_path, capsys):
        code = bench_main([
            "latency", "--transport", "udp", "--impair", "lte-udp", "--rate", "50",
            "--duration", "4", "--mode", "lockstep", "--out-dir", str(tmp_path),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "mean=" in out
        assert (tmp_path / "latency_udp_lockstep.csv").exists()

    def test_track_subcommand(self, tmp_path, capsys):
        code = bench_main([
            "track", "--concept", "trajectory", "--scenario", "construction_site",
            "--script", bypass_script(), "--out-dir", str(tmp_path),
        ])
        assert code == 0
        assert "cross_track_max" in capsys.readouterr().out

    def test_impair_file_parsing(self, tmp_path):
        profile = tmp_path / "link.cfg"
        profile.write_text("one_way_delay_mean_ms = 7.5\ndelay_stddev_ms = 0.5\nseed = 4\n")
        code = bench_main([
            "latency", "--transport", "udp", "--impair", str(profile), "--rate", "100",
            "--duration", "2", "--mode", "lockstep", "--out-dir", str(tmp_path),
        ])
        assert code == 0
        data = json.loads((tmp_path / "latency_udp_lockstep.jsonl").read_text())
        assert data["impairment"]["one_way_delay_mean_ms"] == 7.5

    def test_profiles_include_paper_moments(self):
        assert IMPAIRMENT_PROFILES["lte-udp"].one_way_delay_mean_ms == 15.49
        assert IMPAIRMENT_PROFILES["lte-udp"].delay_stddev_ms == 1.81
        assert IMPAIRMENT_PROFILES["lte-tcp"].one_way_delay_mean_ms == 15.55
        assert IMPAIRMENT_PROFILES["lte-tcp"].delay_stddev_ms == 2.37
