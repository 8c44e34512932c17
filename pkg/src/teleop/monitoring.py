"""Link and stream monitoring fused into a system status snapshot.

Network monitoring tracks per-stream latency percentiles, jitter,
bandwidth, and loss over a sliding window; topic monitoring classifies
each internal stream as Healthy, Degraded, or Stale. The fused snapshot
is what the safety gate decides on.
"""

from __future__ import annotations

import math
import statistics
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

DEFAULT_WINDOW_S = 5.0
STALE_THRESHOLD_MS = 500.0
DEGRADED_RATE_FACTOR = 0.8


class InsufficientSamples(ValueError):
    pass


class StreamStatus(Enum):
    HEALTHY = "Healthy"
    DEGRADED = "Degraded"
    STALE = "Stale"


@dataclass(frozen=True)
class LinkStats:
    latency_p50_ms: float
    latency_p95_ms: float
    jitter_ms: float  # stddev of latencies in the window
    bandwidth_bytes_per_s: float
    loss_ratio: float
    window_s: float

    def __post_init__(self) -> None:
        if self.latency_p50_ms > self.latency_p95_ms + 1e-9:
            raise ValueError("p50 must not exceed p95")
        if not 0.0 <= self.loss_ratio <= 1.0:
            raise ValueError("loss_ratio must be in [0, 1]")


@dataclass(frozen=True)
class StreamHealth:
    stream: str
    measured_rate_hz: float
    expected_rate_hz: float
    staleness_ms: float
    status: StreamStatus


@dataclass(frozen=True)
class StateSnapshot:
    operator_state: str
    vehicle_state: str
    teleoperation_active: bool
    concept: str | None
    stamp: int  # ns


@dataclass(frozen=True)
class SystemStatus:
    operator_state: str
    vehicle_state: str
    teleoperation_active: bool
    concept: str | None
    link: LinkStats | None
    streams: dict[str, StreamHealth] = field(default_factory=dict)
    command_path_ok: bool = True
    stamp: int = 0

    def to_dict(self) -> dict:
        link = None
        if self.link is not None:
            link = {
                "latency_p50_ms": self.link.latency_p50_ms,
                "latency_p95_ms": self.link.latency_p95_ms,
                "jitter_ms": self.link.jitter_ms,
                "bandwidth_bytes_per_s": self.link.bandwidth_bytes_per_s,
                "loss_ratio": self.link.loss_ratio,
                "window_s": self.link.window_s,
            }
        return {
            "operator_state": self.operator_state,
            "vehicle_state": self.vehicle_state,
            "teleoperation_active": self.teleoperation_active,
            "concept": self.concept,
            "link": link,
            "streams": {
                name: {
                    "measured_rate_hz": h.measured_rate_hz,
                    "expected_rate_hz": h.expected_rate_hz,
                    # infinite staleness (nothing received yet) is not
                    # representable in strict JSON; null carries it
                    "staleness_ms": None if math.isinf(h.staleness_ms) else h.staleness_ms,
                    "status": h.status.value,
                }
                for name, h in self.streams.items()
            },
            "command_path_ok": self.command_path_ok,
            "stamp": self.stamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SystemStatus":
        link = None
        if data.get("link") is not None:
            d = data["link"]
            link = LinkStats(
                latency_p50_ms=float(d["latency_p50_ms"]),
                latency_p95_ms=float(d["latency_p95_ms"]),
                jitter_ms=float(d["jitter_ms"]),
                bandwidth_bytes_per_s=float(d["bandwidth_bytes_per_s"]),
                loss_ratio=float(d["loss_ratio"]),
                window_s=float(d["window_s"]),
            )
        streams = {
            name: StreamHealth(
                stream=name,
                measured_rate_hz=float(h["measured_rate_hz"]),
                expected_rate_hz=float(h["expected_rate_hz"]),
                staleness_ms=math.inf if h.get("staleness_ms") is None else float(h["staleness_ms"]),
                status=StreamStatus(h["status"]),
            )
            for name, h in data.get("streams", {}).items()
        }
        return cls(
            operator_state=data["operator_state"],
            vehicle_state=data["vehicle_state"],
            teleoperation_active=bool(data["teleoperation_active"]),
            concept=data.get("concept"),
            link=link,
            streams=streams,
            command_path_ok=bool(data.get("command_path_ok", True)),
            stamp=int(data["stamp"]),
        )


@dataclass
class _Sample:
    send_stamp: int
    receive_stamp: int
    size_bytes: int
    sequence: int | None
    latency_ms: float
    clamped: bool


def nearest_rank(sorted_values: list[float], percentile: float) -> float:
    """Nearest-rank percentile over an already sorted list."""
    if not sorted_values:
        raise InsufficientSamples("no samples")
    rank = math.ceil(percentile / 100.0 * len(sorted_values))
    rank = max(1, min(rank, len(sorted_values)))
    return sorted_values[rank - 1]


class StreamMonitor:
    """Sliding-window receipt monitor for one side of the link.

    ``record_receipt`` is callable from receive threads; the compute
    methods snapshot the window under the same lock, so identical sample
    sets always produce identical stats.
    """

    def __init__(
        self,
        expected_rates_hz: dict[str, float] | None = None,
        *,
        window_s: float = DEFAULT_WINDOW_S,
        stale_threshold_ms: float = STALE_THRESHOLD_MS,
        degraded_factor: float = DEGRADED_RATE_FACTOR,
        clock_offset_ms: float = 0.0,
    ):
        self._expected_rates = dict(expected_rates_hz or {})
        self.window_s = window_s
        self.stale_threshold_ms = stale_threshold_ms
        self.degraded_factor = degraded_factor
        self.clock_offset_ms = clock_offset_ms
        self._windows: dict[str, deque[_Sample]] = {}
        self._lock = threading.Lock()
        self.clamped_count = 0

    def set_expected_rate(self, stream: str, rate_hz: float) -> None:
        with self._lock:
            self._expected_rates[stream] = rate_hz
            self._windows.setdefault(stream, deque())

    def set_clock_offset_ms(self, offset_ms: float) -> None:
        self.clock_offset_ms = offset_ms

    def record_receipt(
        self,
        stream: str,
        send_stamp_ns: int,
        receive_stamp_ns: int,
        size_bytes: int,
        sequence: int | None = None,
    ) -> None:
        latency_ms = (receive_stamp_ns - send_stamp_ns) / 1e6 - self.clock_offset_ms
        clamped = latency_ms < 0.0
        if clamped:
            latency_ms = 0.0  # clock-noise guard
        sample = _Sample(send_stamp_ns, receive_stamp_ns, size_bytes, sequence, latency_ms, clamped)
        with self._lock:
            if clamped:
                self.clamped_count += 1
            self._windows.setdefault(stream, deque()).append(sample)

    def window_samples(self, stream: str, now_ns: int | None = None) -> list[_Sample]:
        with self._lock:
            window = self._windows.get(stream)
            if window is None:
                return []
            horizon = (now_ns if now_ns is not None else (window[-1].receive_stamp if window else 0)) - int(
                self.window_s * 1e9
            )
            while window and window[0].receive_stamp < horizon:
                window.popleft()
            return list(window)

    def compute_link_stats(self, stream: str, window_s: float | None = None, now_ns: int | None = None) -> LinkStats:
        window = window_s if window_s is not None else self.window_s
        samples = self.window_samples(stream, now_ns)
        if len(samples) < 2:
            raise InsufficientSamples(f"stream {stream!r} has {len(samples)} samples in window")
        latencies = sorted(s.latency_ms for s in samples)
        jitter = statistics.pstdev(s.latency_ms for s in samples)
        bandwidth = sum(s.size_bytes for s in samples) / window
        sequences = [s.sequence for s in samples if s.sequence is not None]
        loss = 0.0
        if len(sequences) >= 2:
            span = max(sequences) - min(sequences) + 1
            loss = max(0.0, 1.0 - len(set(sequences)) / span)
        return LinkStats(
            latency_p50_ms=nearest_rank(latencies, 50.0),
            latency_p95_ms=nearest_rank(latencies, 95.0),
            jitter_ms=jitter,
            bandwidth_bytes_per_s=bandwidth,
            loss_ratio=loss,
            window_s=window,
        )

    def compute_stream_health(self, stream: str, now_ns: int) -> StreamHealth:
        if stream not in self._expected_rates:
            raise KeyError(f"no expected rate configured for stream {stream!r}")
        expected = self._expected_rates[stream]
        samples = self.window_samples(stream, now_ns)
        if samples:
            staleness_ms = (now_ns - samples[-1].receive_stamp) / 1e6
            span_s = min(self.window_s, max((now_ns - samples[0].receive_stamp) / 1e9, 1.0 / expected))
            measured = len(samples) / span_s
        else:
            staleness_ms = math.inf
            measured = 0.0
        if staleness_ms > self.stale_threshold_ms:
            status = StreamStatus.STALE
        elif measured < self.degraded_factor * expected:
            status = StreamStatus.DEGRADED
        else:
            status = StreamStatus.HEALTHY
        return StreamHealth(stream, measured, expected, staleness_ms, status)

    def stream_names(self) -> list[str]:
        with self._lock:
            return sorted(set(self._expected_rates) | set(self._windows))


def fuse_status(
    states: StateSnapshot,
    link: LinkStats | None,
    streams: dict[str, StreamHealth],
    command_stream: str = "command",
    extra_stamp_ns: int = 0,
) -> SystemStatus:
    """Fuse module outputs into one snapshot stamped at the freshest input."""
    command_path_ok = True
    health = streams.get(command_stream)
    if health is not None and health.status is StreamStatus.STALE:
        command_path_ok = False
    return SystemStatus(
        operator_state=states.operator_state,
        vehicle_state=states.vehicle_state,
        teleoperation_active=states.teleoperation_active,
        concept=states.concept,
        link=link,
        streams=dict(streams),
        command_path_ok=command_path_ok,
        stamp=max(states.stamp, extra_stamp_ns),
    )
