from __future__ import annotations

import socket
import threading
import time

import pytest

from teleop.transport.channel import (
    ChannelConfig,
    ChannelTimeout,
    Direction,
    PayloadTooLarge,
    Transport,
    open_channel,
)
from teleop.transport.framing import MessageEnvelope, encode_envelope


def udp_pair(port_a, port_b, clock_ns=time.time_ns):
    a = open_channel(
        ChannelConfig("a", Transport.UDP, Direction.DUPLEX, local=("127.0.0.1", port_a), remote=("127.0.0.1", port_b)),
        clock_ns=clock_ns,
    )
    b = open_channel(
        ChannelConfig("b", Transport.UDP, Direction.DUPLEX, local=("127.0.0.1", port_b), remote=("127.0.0.1", port_a)),
        clock_ns=clock_ns,
    )
    return a, b


class TestOpenChannel:
    def test_udp_duplex_loopback_ready(self, udp_ports):
        pa, pb = udp_ports(2)
        a, b = udp_pair(pa, pb)
        try:
            a.send(b"ping")
            received = b.recv(timeout_ms=1000)
            assert received.envelope.payload == b"ping"
        finally:
            a.close()
            b.close()

    def test_second_udp_receiver_same_port_fails(self, udp_port):
        cfg = ChannelConfig("rx", Transport.UDP, Direction.RECEIVE, local=("127.0.0.1", udp_port))
        first = open_channel(cfg)
        try:
            with pytest.raises(OSError):
                open_channel(cfg)
        finally:
            first.close()

    def test_tcp_connect_no_listener_retry_zero(self, tcp_port):
        cfg = ChannelConfig("tx", Transport.TCP, Direction.SEND, remote=("127.0.0.1", tcp_port))
        with pytest.raises(ChannelTimeout):
            open_channel(cfg, connect_retries=0, connect_timeout_s=0.2)

    def test_port_range_validated(self):
        with pytest.raises(ValueError):
            ChannelConfig("x", Transport.UDP, Direction.RECEIVE, local=("127.0.0.1", 80))


class TestSend:
    def test_sequences_start_at_one_and_increase(self, udp_ports):
        pa, pb = udp_ports(2)
        a, b = udp_pair(pa, pb)
        try:
            assert a.send(b"first") == 1
            assert a.send(b"second") == 2
        finally:
            a.close()
            b.close()

    def test_udp_payload_ceiling(self, udp_ports):
        pa, pb = udp_ports(2)
        a, b = udp_pair(pa, pb)
        try:
            with pytest.raises(PayloadTooLarge):
                a.send(b"x" * (70 * 1024))
        finally:
            a.close()
            b.close()

    def test_send_on_closed_channel(self, udp_ports):
        pa, pb = udp_ports(2)
        a, _b = udp_pair(pa, pb)
        _b.close()
        a.close()
        with pytest.raises(OSError):
            a.send(b"late")


class TestRecv:
    def test_loopback_latency_estimate_non_negative(self, udp_ports):
        pa, pb = udp_ports(2)
        a, b = udp_pair(pa, pb)
        b.set_clock_offset_ms(0.0)  # same host, offset known zero
        try:
            a.send(b"stamped")
            received = b.recv(timeout_ms=1000)
            assert received.latency_ms is not None
            assert received.latency_ms >= 0.0
        finally:
            a.close()
            b.close()

    def test_no_latency_estimate_without_sync(self, udp_ports):
        pa, pb = udp_ports(2)
        a, b = udp_pair(pa, pb)
        try:
            a.send(b"stamped")
            assert b.recv(timeout_ms=1000).latency_ms is None
        finally:
            a.close()
            b.close()

    def test_stale_udp_sequence_dropped(self, udp_port):
        rx = open_channel(ChannelConfig("rx", Transport.UDP, Direction.RECEIVE, local=("127.0.0.1", udp_port)))
        raw = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            for seq in (1, 3, 2):
                frame = encode_envelope(
                    MessageEnvelope(channel_id=0, payload_type=0, sequence=seq, send_stamp=0, payload=b"%d" % seq)
                )
                raw.sendto(frame, ("127.0.0.1", udp_port))
            first = rx.recv(timeout_ms=1000)
            second = rx.recv(timeout_ms=1000)
            assert (first.envelope.sequence, second.envelope.sequence) == (1, 3)
            with pytest.raises(ChannelTimeout):
                rx.recv(timeout_ms=200)  # sequence 2 was dropped as stale
            assert rx.stale_drops == 1
        finally:
            raw.close()
            rx.close()

    def test_corrupted_frame_dropped_and_counted(self, udp_port):
        rx = open_channel(ChannelConfig("rx", Transport.UDP, Direction.RECEIVE, local=("127.0.0.1", udp_port)))
        raw = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            frame = bytearray(
                encode_envelope(MessageEnvelope(channel_id=0, payload_type=0, sequence=1, send_stamp=0, payload=b"ok"))
            )
            frame[-1] ^= 0xFF  # corrupt the crc
            raw.sendto(bytes(frame), ("127.0.0.1", udp_port))
            good = encode_envelope(
                MessageEnvelope(channel_id=0, payload_type=0, sequence=2, send_stamp=0, payload=b"good")
            )
            raw.sendto(good, ("127.0.0.1", udp_port))
            received = rx.recv(timeout_ms=1000)
            assert received.envelope.payload == b"good"
            assert rx.crc_drops == 1
        finally:
            raw.close()
            rx.close()

    def test_recv_timeout(self, udp_port):
        rx = open_channel(ChannelConfig("rx", Transport.UDP, Direction.RECEIVE, local=("127.0.0.1", udp_port)))
        try:
            with pytest.raises(ChannelTimeout):
                rx.recv(timeout_ms=100)
        finally:
            rx.close()


class TestTcp:
    def test_tcp_round_trip(self, tcp_port):
        server = open_channel(
            ChannelConfig("srv", Transport.TCP, Direction.DUPLEX, local=("127.0.0.1", tcp_port))
        )
        received_holder = {}

        def serve():
            received_holder["msg"] = server.recv(timeout_ms=3000)

        thread = threading.Thread(target=serve)
        thread.start()
        client = open_channel(
            ChannelConfig("cli", Transport.TCP, Direction.DUPLEX, remote=("127.0.0.1", tcp_port))
        )
        try:
            client.send(b"over tcp")
            thread.join(timeout=5)
            assert received_holder["msg"].envelope.payload == b"over tcp"
        finally:
            client.close()
            server.close()

    def test_tcp_preserves_message_boundaries(self, tcp_port):
        server = open_channel(ChannelConfig("srv", Transport.TCP, Direction.RECEIVE, local=("127.0.0.1", tcp_port)))
        collected = []

        def serve():
            for _ in range(3):
                collected.append(server.recv(timeout_ms=3000).envelope.payload)

        thread = threading.Thread(target=serve)
        thread.start()
        client = open_channel(ChannelConfig("cli", Transport.TCP, Direction.SEND, remote=("127.0.0.1", tcp_port)))
        try:
            for i in range(3):
                client.send(b"msg-%d" % i)
            thread.join(timeout=5)
            assert collected == [b"msg-0", b"msg-1", b"msg-2"]
        finally:
            client.close()
            server.close()

    def test_large_payload_over_tcp(self, tcp_port):
        server = open_channel(ChannelConfig("srv", Transport.TCP, Direction.RECEIVE, local=("127.0.0.1", tcp_port)))
        blob = bytes(range(256)) * 1024  # 256 KiB, beyond the UDP ceiling
        result = {}

        def serve():
            result["payload"] = server.recv(timeout_ms=5000).envelope.payload

        thread = threading.Thread(target=serve)
        thread.start()
        client = open_channel(ChannelConfig("cli", Transport.TCP, Direction.SEND, remote=("127.0.0.1", tcp_port)))
        try:
            client.send(blob)
            thread.join(timeout=8)
            assert result["payload"] == blob
        finally:
            client.close()
            server.close()


class TestDirectionEnforcement:
    def test_receive_only_rejects_send(self, udp_port):
        rx = open_channel(ChannelConfig("rx", Transport.UDP, Direction.RECEIVE, local=("127.0.0.1", udp_port)))
        try:
            with pytest.raises(OSError):
                rx.send(b"nope")
        finally:
            rx.close()

    def test_send_only_rejects_recv(self, udp_port):
        tx = open_channel(ChannelConfig("tx", Transport.UDP, Direction.SEND, remote=("127.0.0.1", udp_port)))
        try:
            with pytest.raises(OSError):
                tx.recv(timeout_ms=50)
        finally:
            tx.close()


class TestDispatchOverhead:
    def test_loopback_dispatch_under_one_ms(self, udp_ports):
        # serialization + local dispatch of a control-command-sized payload
        pa, pb = udp_ports(2)
        a, b = udp_pair(pa, pb)
        payload = b"\x00" * 24
        try:
            n = 300
            start = time.perf_counter()
            for _ in range(n):
                a.send(payload)
                b.recv(timeout_ms=1000)
            mean_ms = (time.perf_counter() - start) / n * 1e3
            assert mean_ms < 1.0
        finally:
            a.close()
            b.close()
