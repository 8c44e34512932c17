"""Report files: human-readable text, per-sample CSV, and JSON lines.

Outputs are deterministic for deterministic inputs: the sample CSV carries
only the measured latency series and its summary statistics, so lockstep
runs export byte-identical files under the same seed. Wall-clock metadata
(overhead timing) lives in the text and JSON reports.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from teleop.harness.latency import LatencyReport
from teleop.harness.tracking import TrackingReport
from teleop.runlog import write_csv

_SPARK_CHARS = "▁▂▃▄▅▆▇█"


def sparkline(samples: tuple[float, ...] | list[float], bins: int = 32) -> str:
    if not samples:
        return ""
    lo, hi = min(samples), max(samples)
    if hi <= lo:
        return _SPARK_CHARS[0] * min(bins, 8)
    counts = [0] * bins
    for value in samples:
        index = min(bins - 1, int((value - lo) / (hi - lo) * bins))
        counts[index] += 1
    peak = max(counts)
    return "".join(_SPARK_CHARS[min(len(_SPARK_CHARS) - 1, int(c / peak * (len(_SPARK_CHARS) - 1)))] for c in counts)


def _latency_text(report: LatencyReport) -> str:
    imp = report.impairment
    lines = [
        f"latency experiment: transport={report.transport} mode={report.mode} rate={report.rate_hz:g} Hz",
        f"emulated link: mean={imp.one_way_delay_mean_ms:g} ms stddev={imp.delay_stddev_ms:g} ms "
        f"loss={imp.loss_probability:g} seed={imp.seed}",
        f"samples: n={report.n} lost={report.lost_count}",
        f"one-way latency: mean={report.mean_ms:.3f} ms stddev={report.stddev_ms:.3f} ms",
        f"percentiles: p50={report.p50_ms:.3f} p95={report.p95_ms:.3f} p99={report.p99_ms:.3f} ms",
        f"overhead: mean={report.overhead_mean_ms:.4f} ms fraction={report.overhead_fraction:.4f}",
        f"injected delay mean: {report.applied_delay_mean_ms:.3f} ms",
        f"uncalibrated mean: {report.raw_mean_ms:.3f} ms "
        f"(emulator write lag mean={report.scheduler_lag_mean_ms:.4f} max={report.scheduler_lag_max_ms:.2f} ms)",
        f"clock sync uncertainty: {report.clock_uncertainty_ms:.4f} ms",
        "",
        f"distribution  [{min(report.samples_ms):.2f} .. {max(report.samples_ms):.2f} ms]",
        f"  {sparkline(report.samples_ms)}",
        "",
    ]
    return "\n".join(lines)


def _latency_csv_rows(report: LatencyReport) -> list[list]:
    rows: list[list] = [["index", "latency_ms"]]
    for i, sample in enumerate(report.samples_ms):
        rows.append([i, repr(sample)])
    rows.append(["mean", repr(report.mean_ms)])
    rows.append(["stddev", repr(report.stddev_ms)])
    rows.append(["p50", repr(report.p50_ms)])
    rows.append(["p95", repr(report.p95_ms)])
    rows.append(["p99", repr(report.p99_ms)])
    return rows


def _latency_json(report: LatencyReport) -> dict:
    data = asdict(report)
    data["impairment"] = asdict(report.impairment)
    data.pop("samples_ms")
    return data


def _tracking_text(report: TrackingReport) -> str:
    lines = [
        f"tracking scenario: concept={report.concept} scenario={report.scenario}",
        f"duration: {report.duration_s:.2f} s  goal_reached={report.goal_reached}",
        f"velocity error: rms={report.velocity_rms:.3f} m/s max={report.velocity_max:.3f} m/s",
        f"steering error: rms={report.steering_rms:.4f} rad max={report.steering_max:.4f} rad",
    ]
    if report.cross_track_rms is not None:
        lines.append(
            f"cross-track error: rms={report.cross_track_rms:.3f} m max={report.cross_track_max:.3f} m"
        )
    lines.append("series: " + ", ".join(report.csv_paths))
    lines.append("")
    return "\n".join(lines)


def emit_report(
    report: LatencyReport | TrackingReport,
    formats: tuple[str, ...] = ("text", "csv", "json-lines"),
    out_dir: str | Path = ".",
    *,
    basename: str | None = None,
) -> list[Path]:
    """Write the report in the requested formats; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if isinstance(report, LatencyReport):
        base = basename or f"latency_{report.transport}_{report.mode}"
        for fmt in formats:
            if fmt == "text":
                path = out_dir / f"{base}.txt"
                path.write_text(_latency_text(report), encoding="utf-8")
            elif fmt == "csv":
                path = write_csv(_latency_csv_rows(report), out_dir / f"{base}.csv")
            elif fmt == "json-lines":
                path = out_dir / f"{base}.jsonl"
                path.write_text(json.dumps(_latency_json(report), sort_keys=True) + "\n", encoding="utf-8")
            else:
                raise ValueError(f"unknown format {fmt!r}")
            written.append(path)
        return written
    base = basename or f"tracking_{report.concept}_{report.scenario}"
    for fmt in formats:
        if fmt == "text":
            path = out_dir / f"{base}.txt"
            path.write_text(_tracking_text(report), encoding="utf-8")
        elif fmt == "csv":
            rows = [["metric", "value"]] + [[k, repr(v)] for k, v in sorted(report.to_dict().items())
                                            if not isinstance(v, list)]
            path = write_csv(rows, out_dir / f"{base}.csv")
        elif fmt == "json-lines":
            path = out_dir / f"{base}.jsonl"
            path.write_text(json.dumps(report.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written
