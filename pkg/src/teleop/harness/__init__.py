"""Desk-scale experiment harness: control-command latency distributions
under emulated network conditions, serialization-overhead measurement, and
closed-loop tracking scenarios."""

from teleop.harness.latency import (
    IMPAIRMENT_PROFILES,
    LatencyReport,
    measure_dispatch_overhead,
    run_latency_experiment,
)
from teleop.harness.tracking import TrackingReport, run_tracking_scenario
from teleop.harness.report import emit_report

__all__ = [
    "IMPAIRMENT_PROFILES",
    "LatencyReport",
    "TrackingReport",
    "emit_report",
    "measure_dispatch_overhead",
    "run_latency_experiment",
    "run_tracking_scenario",
]
