from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from teleop.streams import PT_CLOCK_PROBE
from teleop.transport.channel import ChannelConfig, ChannelTimeout, Direction, Transport, open_channel
from teleop.transport.clock_sync import ClockSyncError, EchoResponder, estimate_clock_offset
from teleop.transport.framing import MessageEnvelope
from teleop.transport.impair import ImpairmentConfig, impair


@dataclass
class _FakeReceived:
    envelope: MessageEnvelope
    receive_stamp: int
    latency_ms: float | None = None


class AnalyticLinkChannel:
    """Virtual duplex link with fixed one-way delays and a skewed responder.

    Advances a virtual local clock; the remote answers with stamps from its
    own (skewed) clock, which makes the four-stamp arithmetic exactly
    checkable.
    """

    def __init__(self, forward_delay_ns: int, backward_delay_ns: int, remote_skew_ns: int):
        self.forward_delay_ns = forward_delay_ns
        self.backward_delay_ns = backward_delay_ns
        self.remote_skew_ns = remote_skew_ns
        self.now_ns = 1_000_000_000
        self._pending: list[bytes] = []

    def clock(self) -> int:
        return self.now_ns

    def send(self, payload: bytes, payload_type: int) -> int:
        import struct

        _, t1, _, _ = struct.unpack("<BQQQ", payload)
        arrival_local = self.now_ns + self.forward_delay_ns
        t2 = arrival_local + self.remote_skew_ns  # remote receive stamp
        t3 = t2  # instantaneous turnaround
        self._pending.append(struct.pack("<BQQQ", 1, t1, t2, t3))
        return 1

    def recv(self, timeout_ms: float) -> _FakeReceived:
        if not self._pending:
            raise ChannelTimeout("no pending response")
        payload = self._pending.pop(0)
        self.now_ns += self.forward_delay_ns + self.backward_delay_ns
        return _FakeReceived(
            envelope=MessageEnvelope(0, PT_CLOCK_PROBE, 1, 0, payload),
            receive_stamp=self.now_ns,
        )


class DeadChannel:
    def send(self, payload: bytes, payload_type: int) -> int:
        return 1

    def recv(self, timeout_ms: float):
        raise ChannelTimeout("nothing ever comes back")


def udp_duplex(name, local_port, remote_port, clock_ns=time.time_ns):
    return open_channel(
        ChannelConfig(
            name,
            Transport.UDP,
            Direction.DUPLEX,
            local=("127.0.0.1", local_port),
            remote=("127.0.0.1", remote_port),
        ),
        clock_ns=clock_ns,
    )


class TestFourStampArithmetic:
    def test_symmetric_link_zero_skew(self):
        link = AnalyticLinkChannel(10_000_000, 10_000_000, 0)
        estimate = estimate_clock_offset(link, n_probes=5, probe_interval_ms=0, clock_ns=link.clock)
        assert estimate.offset_ms == pytest.approx(0.0, abs=1e-9)
        assert estimate.round_trip_ms == pytest.approx(20.0, abs=1e-9)
        assert estimate.uncertainty_ms == pytest.approx(10.0, abs=1e-9)

    def test_injected_skew_recovered_exactly_under_symmetry(self):
        # oracle: offset = ((t2-t1)+(t3-t4))/2 = skew + (d_fwd - d_back)/2,
        # so symmetric delays recover the skew exactly
        skew_ns = 50_000_000
        link = AnalyticLinkChannel(10_000_000, 10_000_000, skew_ns)
        estimate = estimate_clock_offset(link, n_probes=5, probe_interval_ms=0, clock_ns=link.clock)
        assert estimate.offset_ms == pytest.approx(50.0, abs=1e-9)

    def test_asymmetry_bias_matches_oracle(self):
        # 14 ms out, 6 ms back: bias = (14 - 6) / 2 = +4 ms on top of the skew
        link = AnalyticLinkChannel(14_000_000, 6_000_000, 50_000_000)
        estimate = estimate_clock_offset(link, n_probes=3, probe_interval_ms=0, clock_ns=link.clock)
        assert estimate.offset_ms == pytest.approx(54.0, abs=1e-9)
        assert estimate.round_trip_ms == pytest.approx(20.0, abs=1e-9)

    def test_zero_responses_is_an_error(self):
        with pytest.raises(ClockSyncError):
            estimate_clock_offset(DeadChannel(), n_probes=4, timeout_ms=20, probe_interval_ms=0)


class TestOverRealSockets:
    def test_loopback_offset_near_zero(self, udp_ports):
        pa, pb = udp_ports(2)
        operator = udp_duplex("op", pa, pb)
        vehicle = udp_duplex("veh", pb, pa)
        responder = EchoResponder(vehicle).start()
        try:
            estimate = estimate_clock_offset(operator, n_probes=8, probe_interval_ms=2)
            assert abs(estimate.offset_ms) <= 5.0
            assert estimate.uncertainty_ms >= 0.0
        finally:
            responder.stop()
            operator.close()
            vehicle.close()

    def test_skewed_responder_over_emulated_delay(self, udp_ports):
        # symmetric emulated delay 10 +- 1 ms with a +50 ms remote clock;
        # bounded jitter makes |offset error| <= 1 ms structural, and the
        # minimum-RTT filter concentrates it well below that
        pa, pb = udp_ports(2)
        skew_ns = 50_000_000
        operator = udp_duplex("op", pa, pb)
        vehicle = udp_duplex("veh", pb, pa, clock_ns=lambda: time.time_ns() + skew_ns)
        op_shim = impair(operator, ImpairmentConfig(10.0, 1.0, seed=31, distribution="uniform"))
        veh_shim = impair(vehicle, ImpairmentConfig(10.0, 1.0, seed=32, distribution="uniform"))
        responder = EchoResponder(veh_shim, clock_ns=lambda: time.time_ns() + skew_ns).start()
        try:
            estimate = estimate_clock_offset(op_shim, n_probes=20, timeout_ms=400, probe_interval_ms=2)
            assert estimate.offset_ms == pytest.approx(50.0, abs=1.0)
            assert estimate.round_trip_ms >= 15.0
        finally:
            responder.stop()
            op_shim.close()
            veh_shim.close()
