"""Clock offset estimation between the two hosts of a link.

Four-stamp exchange over a duplex channel against an echo responder:
per probe, offset = ((t2 - t1) + (t3 - t4)) / 2 and
rtt = (t4 - t1) - (t3 - t2). The probe with the minimum round trip wins;
its half round trip bounds the uncertainty. Internalized so desk-scale
runs need no external time service.
"""

from __future__ import annotations

import struct
import threading
import time
from dataclasses import dataclass

from teleop.streams import PT_CLOCK_PROBE
from teleop.transport.channel import Channel, ChannelTimeout

_PROBE = struct.Struct("<BQQQ")  # kind (0 request, 1 response), t1, t2, t3
_REQUEST = 0
_RESPONSE = 1


class ClockSyncError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClockSyncEstimate:
    offset_ms: float  # remote clock minus local clock
    round_trip_ms: float
    uncertainty_ms: float

    def __post_init__(self) -> None:
        if self.uncertainty_ms < 0.0:
            raise ValueError("uncertainty must be >= 0")


class EchoResponder:
    """Answers clock probes on a duplex channel with receive/transmit stamps.

    The responder's clock is injectable so tests can skew it.
    """

    def __init__(self, channel, clock_ns=time.time_ns):
        self._channel = channel
        self._clock_ns = clock_ns
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> "EchoResponder":
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def __enter__(self) -> "EchoResponder":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                received = self._channel.recv(timeout_ms=100.0)
            except ChannelTimeout:
                continue
            except OSError:
                return
            if received.envelope.payload_type != PT_CLOCK_PROBE:
                continue
            kind, t1, _, _ = _PROBE.unpack(received.envelope.payload)
            if kind != _REQUEST:
                continue
            t2 = self._clock_ns()
            t3 = self._clock_ns()
            try:
                self._channel.send(_PROBE.pack(_RESPONSE, t1, t2, t3), PT_CLOCK_PROBE)
            except OSError:
                return


def estimate_clock_offset(
    channel: Channel,
    n_probes: int = 8,
    *,
    timeout_ms: float = 500.0,
    probe_interval_ms: float = 10.0,
    clock_ns=time.time_ns,
) -> ClockSyncEstimate:
    """Estimate remote-minus-local offset via the minimum-RTT probe.

    Raises ClockSyncError when fewer than half the probes are answered.
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    samples: list[tuple[float, float]] = []  # (rtt_ns, offset_ns)
    for i in range(n_probes):
        t1 = clock_ns()
        channel.send(_PROBE.pack(_REQUEST, t1, 0, 0), PT_CLOCK_PROBE)
        deadline = time.monotonic() + timeout_ms / 1000.0
        while True:
            remaining_ms = (deadline - time.monotonic()) * 1000.0
            if remaining_ms <= 0:
                break
            try:
                received = channel.recv(timeout_ms=remaining_ms)
            except ChannelTimeout:
                break
            if received.envelope.payload_type != PT_CLOCK_PROBE:
                continue
            kind, echo_t1, t2, t3 = _PROBE.unpack(received.envelope.payload)
            if kind != _RESPONSE or echo_t1 != t1:
                continue  # stray or late response from an earlier probe
            t4 = clock_ns()
            rtt = (t4 - t1) - (t3 - t2)
            offset = ((t2 - t1) + (t3 - t4)) / 2.0
            samples.append((rtt, offset))
            break
        if i + 1 < n_probes and probe_interval_ms > 0:
            time.sleep(probe_interval_ms / 1000.0)
    if len(samples) < max(1, n_probes // 2):
        raise ClockSyncError(f"only {len(samples)} of {n_probes} probes answered")
    rtt_ns, offset_ns = min(samples, key=lambda s: s[0])
    return ClockSyncEstimate(
        offset_ms=offset_ns / 1e6,
        round_trip_ms=rtt_ns / 1e6,
        uncertainty_ms=max(0.0, rtt_ns / 2e6),
    )
