"""teleop-bench: latency and tracking experiments from the command line."""

from __future__ import annotations

import argparse
from pathlib import Path

from teleop.domain import PlatformConfig
from teleop.harness.latency import IMPAIRMENT_PROFILES, run_latency_experiment
from teleop.harness.report import emit_report
from teleop.harness.tracking import run_tracking_scenario
from teleop.transport.impair import ImpairmentConfig


def _impairment(text: str, seed: int) -> ImpairmentConfig:
    if text in IMPAIRMENT_PROFILES:
        profile = IMPAIRMENT_PROFILES[text]
        return ImpairmentConfig(
            profile.one_way_delay_mean_ms, profile.delay_stddev_ms, profile.loss_probability,
            profile.reorder, seed, profile.stall_penalty_ms, profile.distribution,
        )
    path = Path(text)
    if not path.exists():
        raise SystemExit(f"unknown impairment profile or file: {text}")
    values: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line and "=" in line:
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return ImpairmentConfig(
        one_way_delay_mean_ms=float(values.get("one_way_delay_mean_ms", 0.0)),
        delay_stddev_ms=float(values.get("delay_stddev_ms", 0.0)),
        loss_probability=float(values.get("loss_probability", 0.0)),
        reorder=values.get("reorder", "false").lower() == "true",
        seed=int(values.get("seed", seed)),
        stall_penalty_ms=float(values.get("stall_penalty_ms", 200.0)),
        distribution=values.get("distribution", "normal"),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleop-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    latency = sub.add_parser("latency", help="one-way control-command latency distribution")
    latency.add_argument("--transport", choices=["udp", "tcp"], required=True)
    latency.add_argument("--impair", default="lte-udp",
                         help=f"profile ({', '.join(IMPAIRMENT_PROFILES)}) or key=value file")
    latency.add_argument("--rate", type=float, default=10.0, help="command rate in Hz")
    latency.add_argument("--duration", type=float, default=100.0, help="seconds")
    latency.add_argument("--mode", choices=["realtime", "lockstep"], default="realtime")
    latency.add_argument("--seed", type=int, default=0)
    latency.add_argument("--out-dir", type=Path, default=Path("bench-out"))

    track = sub.add_parser("track", help="closed-loop tracking scenario (lockstep)")
    track.add_argument("--concept", choices=["direct", "trajectory"], required=True)
    track.add_argument("--scenario", default="construction_site")
    track.add_argument("--script", type=Path, required=True,
                       help="input-frame NDJSON (direct) or x,y,v CSV (trajectory)")
    track.add_argument("--platform-config", type=Path, default=None)
    track.add_argument("--duration-limit", type=float, default=120.0)
    track.add_argument("--out-dir", type=Path, default=Path("bench-out"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "latency":
        impairment = _impairment(args.impair, args.seed)
        report = run_latency_experiment(
            args.transport, impairment, rate_hz=args.rate, duration_s=args.duration, mode=args.mode
        )
        paths = emit_report(report, out_dir=args.out_dir)
        print(
            f"{report.transport} {report.mode}: n={report.n} mean={report.mean_ms:.3f} ms "
            f"stddev={report.stddev_ms:.3f} ms p99={report.p99_ms:.3f} ms "
            f"overhead={report.overhead_mean_ms:.4f} ms ({report.overhead_fraction:.1%})"
        )
    else:
        platform = PlatformConfig.load(args.platform_config) if args.platform_config else PlatformConfig()
        report = run_tracking_scenario(
            args.concept, args.scenario, args.script,
            out_dir=args.out_dir, platform=platform, duration_limit_s=args.duration_limit,
        )
        paths = emit_report(report, out_dir=args.out_dir)
        line = (
            f"{report.concept} on {report.scenario}: goal_reached={report.goal_reached} "
            f"v_rms={report.velocity_rms:.3f} m/s steer_rms={report.steering_rms:.4f} rad"
        )
        if report.cross_track_max is not None:
            line += f" cross_track_max={report.cross_track_max:.3f} m"
        print(line)
    for path in paths:
        print(f"  wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
