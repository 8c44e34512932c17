"""Control-command transmission latency experiments.

Measures one-way latency of primary control commands between in-process
operator and vehicle endpoints, under an emulated link. Two modes:

* ``realtime``: real loopback sockets, the impairment scheduler, wall-clock
  pacing, and internal clock sync. Honest end-to-end timing.
* ``lockstep``: the same sampling rules applied on a virtual timeline;
  bit-deterministic under a seed, used for reproducible exports.

The overhead portion (serialize + local dispatch + deserialize) is always
measured for real against loopback sockets and reported separately from
the network portion.
"""

from __future__ import annotations

import socket
import statistics
import threading
import time
from dataclasses import dataclass, field

from teleop.domain import PrimaryControlCommand, decode_primary_command, encode_primary_command
from teleop.monitoring import nearest_rank
from teleop.streams import PT_PRIMARY_COMMAND
from teleop.transport.channel import (
    Channel,
    ChannelConfig,
    ChannelTimeout,
    Direction,
    Transport,
    open_channel,
)
from teleop.transport.clock_sync import EchoResponder, estimate_clock_offset
from teleop.transport.impair import ImpairmentConfig, VirtualLink, impair

# Emulated link presets. The two mobile-network profiles carry the measured
# moments the experiment reproduces; the LAN profile is configurable taste.
IMPAIRMENT_PROFILES: dict[str, ImpairmentConfig] = {
    "lte-udp": ImpairmentConfig(15.49, 1.81),
    "lte-tcp": ImpairmentConfig(15.55, 2.37),
    "lan": ImpairmentConfig(0.5, 0.1),
    "none": ImpairmentConfig(0.0, 0.0),
}


@dataclass(frozen=True)
class LatencyReport:
    transport: str
    impairment: ImpairmentConfig
    mode: str
    rate_hz: float
    n: int
    mean_ms: float
    stddev_ms: float
    p50_ms: float
    p95_ms: float
    p99_ms: float
    overhead_mean_ms: float
    overhead_fraction: float
    applied_delay_mean_ms: float
    lost_count: int
    clock_uncertainty_ms: float
    # realtime mode: uncalibrated mean and the emulator write-lag it
    # contained; mean_ms has the per-frame scheduler lag subtracted
    raw_mean_ms: float = 0.0
    scheduler_lag_mean_ms: float = 0.0
    scheduler_lag_max_ms: float = 0.0
    samples_ms: tuple[float, ...] = field(repr=False, default=())

    def __post_init__(self) -> None:
        if self.n < 100:
            raise ValueError(f"a valid report needs n >= 100, got {self.n}")
        expected_fraction = self.overhead_mean_ms / self.mean_ms if self.mean_ms > 0 else 0.0
        if abs(self.overhead_fraction - expected_fraction) > 1e-9:
            raise ValueError("overhead_fraction must equal overhead_mean / mean")


def _stats(samples: list[float]) -> tuple[float, float, float, float, float]:
    ordered = sorted(samples)
    return (
        statistics.mean(samples),
        statistics.pstdev(samples),
        nearest_rank(ordered, 50.0),
        nearest_rank(ordered, 95.0),
        nearest_rank(ordered, 99.0),
    )


def _command_payload(sequence: int, stamp: int) -> bytes:
    return encode_primary_command(PrimaryControlCommand(0.05, 3.0, sequence, stamp))


def measure_dispatch_overhead(iterations: int = 2000) -> float:
    """Mean encode + loopback dispatch + decode time, in ms.

    Uses a plain UDP socket pair on loopback so the measurement covers the
    serialization plus the local transport hop, nothing else.
    """
    rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    rx.bind(("127.0.0.1", 0))
    rx.settimeout(2.0)
    tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    target = rx.getsockname()
    durations = []
    try:
        for i in range(iterations):
            start = time.perf_counter_ns()
            payload = _command_payload(i + 1, time.time_ns())
            tx.sendto(payload, target)
            data, _ = rx.recvfrom(2048)
            decode_primary_command(data)
            durations.append(time.perf_counter_ns() - start)
    finally:
        tx.close()
        rx.close()
    return statistics.mean(durations) / 1e6


def _build_report(
    transport: Transport,
    impairment: ImpairmentConfig,
    mode: str,
    rate_hz: float,
    samples_ms: list[float],
    applied_delays: list[float],
    lost: int,
    overhead_mean_ms: float,
    clock_uncertainty_ms: float,
    raw_mean_ms: float = 0.0,
    scheduler_lags_ms: list[float] | None = None,
) -> LatencyReport:
    mean, stddev, p50, p95, p99 = _stats(samples_ms)
    lags = scheduler_lags_ms or []
    return LatencyReport(
        transport=transport.value,
        impairment=impairment,
        mode=mode,
        rate_hz=rate_hz,
        n=len(samples_ms),
        mean_ms=mean,
        stddev_ms=stddev,
        p50_ms=p50,
        p95_ms=p95,
        p99_ms=p99,
        overhead_mean_ms=overhead_mean_ms,
        overhead_fraction=overhead_mean_ms / mean if mean > 0 else 0.0,
        applied_delay_mean_ms=statistics.mean(applied_delays) if applied_delays else 0.0,
        lost_count=lost,
        clock_uncertainty_ms=clock_uncertainty_ms,
        raw_mean_ms=raw_mean_ms or mean,
        scheduler_lag_mean_ms=statistics.mean(lags) if lags else 0.0,
        scheduler_lag_max_ms=max(lags) if lags else 0.0,
        samples_ms=tuple(samples_ms),
    )


def _run_lockstep(transport: Transport, impairment: ImpairmentConfig, rate_hz: float, n: int) -> LatencyReport:
    link = VirtualLink(impairment, transport)
    period_ms = 1000.0 / rate_hz
    samples: list[float] = []
    for i in range(n):
        t_send = i * period_ms
        # the command really is encoded and decoded; only time is virtual
        payload = _command_payload(i + 1, int(t_send * 1e6))
        decode_primary_command(payload)
        delivery = link.offer(t_send)
        if delivery is None:
            continue
        samples.append(delivery - t_send)
    overhead = measure_dispatch_overhead(500)
    return _build_report(
        transport, impairment, "lockstep", rate_hz, samples,
        link.applied_delays_ms, link.dropped_count, overhead, 0.0,
    )


def _open_pair(transport: Transport) -> tuple[Channel, Channel]:
    if transport is Transport.UDP:
        rx = open_channel(ChannelConfig("bench-rx", Transport.UDP, Direction.RECEIVE, local=("127.0.0.1", 0)))
        port = rx.local_address[1]
        tx = open_channel(ChannelConfig("bench-tx", Transport.UDP, Direction.SEND, remote=("127.0.0.1", port)))
        return tx, rx
    rx = open_channel(ChannelConfig("bench-rx", Transport.TCP, Direction.DUPLEX, local=("127.0.0.1", 0)))
    port = rx.local_address[1]
    tx = open_channel(ChannelConfig("bench-tx", Transport.TCP, Direction.DUPLEX, remote=("127.0.0.1", port)))
    return tx, rx


def _free_udp_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _sync_clock() -> tuple[float, float]:
    """Internal clock sync over a dedicated loopback pair: (offset, uncertainty)."""
    for _ in range(10):
        port_a, port_b = _free_udp_port(), _free_udp_port()
        try:
            a = open_channel(
                ChannelConfig("sync-a", Transport.UDP, Direction.DUPLEX,
                              local=("127.0.0.1", port_a), remote=("127.0.0.1", port_b))
            )
        except OSError:
            continue
        try:
            b = open_channel(
                ChannelConfig("sync-b", Transport.UDP, Direction.DUPLEX,
                              local=("127.0.0.1", port_b), remote=("127.0.0.1", port_a))
            )
        except OSError:
            a.close()
            continue
        responder = EchoResponder(b).start()
        try:
            estimate = estimate_clock_offset(a, n_probes=8, timeout_ms=300.0, probe_interval_ms=2.0)
            return estimate.offset_ms, estimate.uncertainty_ms
        finally:
            responder.stop()
            a.close()
            b.close()
    raise OSError("could not allocate a loopback port pair for clock sync")


def _run_realtime(
    transport: Transport, impairment: ImpairmentConfig, rate_hz: float, n: int
) -> LatencyReport:
    offset_ms, uncertainty_ms = _sync_clock()
    tx_raw, rx = _open_pair(transport)
    rx.set_clock_offset_ms(offset_ms)
    shim = impair(tx_raw, impairment)
    raw_samples: list[tuple[int, float]] = []  # (sequence, raw one-way ms)
    done = threading.Event()

    def drain() -> None:
        misses = 0
        while len(raw_samples) < n and not done.is_set():
            try:
                received = rx.recv(timeout_ms=500.0)
            except ChannelTimeout:
                misses += 1
                if misses > 6:  # sender finished and the link has drained
                    return
                continue
            except OSError:
                return
            if received.envelope.payload_type == PT_PRIMARY_COMMAND and received.latency_ms is not None:
                decode_primary_command(received.envelope.payload)
                raw_samples.append((received.envelope.sequence, max(0.0, received.latency_ms)))

    receiver = threading.Thread(target=drain, name="bench-recv")
    receiver.start()
    period = 1.0 / rate_hz
    next_send = time.monotonic()
    try:
        for i in range(n):
            next_send += period
            delay = next_send - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            shim.send(_command_payload(i + 1, time.time_ns()), PT_PRIMARY_COMMAND)
        shim.drain(timeout_s=30.0)
        time.sleep(min(0.5, 4 * impairment.one_way_delay_mean_ms / 1000.0 + 0.05))
        done.set()
        receiver.join(timeout=5.0)
    finally:
        done.set()
        shim.close()
        rx.close()
    if len(raw_samples) < max(100, n // 2):
        raise RuntimeError(f"insufficient samples: {len(raw_samples)} of {n}")
    # calibrate out emulator write lag: time a frame sat past its due point
    # is host-scheduling error, not behavior of the emulated link
    lags = [shim.write_lags_ms.get(seq, 0.0) for seq, _ in raw_samples]
    samples = [max(0.0, raw - lag) for (_, raw), lag in zip(raw_samples, lags)]
    raw_mean = statistics.mean(raw for _, raw in raw_samples)
    overhead = measure_dispatch_overhead(500)
    return _build_report(
        transport, impairment, "realtime", rate_hz, samples,
        shim.applied_delays_ms, shim.dropped_count, overhead, uncertainty_ms,
        raw_mean_ms=raw_mean, scheduler_lags_ms=lags,
    )


def run_latency_experiment(
    transport: Transport | str,
    impairment: ImpairmentConfig | str,
    rate_hz: float = 10.0,
    duration_s: float | None = None,
    *,
    n: int | None = None,
    mode: str = "realtime",
) -> LatencyReport:
    """Measure the one-way latency distribution of control commands.

    Either ``n`` or ``duration_s`` fixes the sample count (n = rate x
    duration). Raises on clock-sync failure or when fewer than half the
    commands arrive.
    """
    if isinstance(transport, str):
        transport = Transport(transport.lower())
    if isinstance(impairment, str):
        impairment = IMPAIRMENT_PROFILES[impairment]
    if n is None:
        if duration_s is None:
            raise ValueError("give either n or duration_s")
        n = max(1, round(rate_hz * duration_s))
    if mode == "lockstep":
        return _run_lockstep(transport, impairment, rate_hz, n)
    if mode == "realtime":
        return _run_realtime(transport, impairment, rate_hz, n)
    raise ValueError(f"unknown mode {mode!r}")
