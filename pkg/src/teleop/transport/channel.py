"""UDP and TCP message channels carrying framed envelopes.

A channel is owned by one logical sender and one logical receiver. Send and
recv on a duplex channel may run concurrently; concurrent senders must
serialize externally (send itself holds a small lock so sequence numbers
stay consistent).

UDP receivers silently drop envelopes whose sequence is not newer than the
last delivered one: control streams want freshest-wins, not replay.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from dataclasses import dataclass
from enum import Enum

from teleop.transport.framing import (
    HEADER_SIZE,
    FrameError,
    MessageEnvelope,
    decode_envelope,
    encode_envelope,
    frame_length_from_header,
)

# Below the IP fragmentation ceiling by decision; larger blobs go over TCP.
MAX_UDP_PAYLOAD = 60 * 1024

_RECV_BUFSIZE = 65535

# Kernel receive timestamps make arrival stamps independent of receiver
# thread wakeup latency; timespec layout is two native longs.
_SO_TIMESTAMPNS = getattr(socket, "SO_TIMESTAMPNS", 35)
_TIMESPEC = struct.Struct("@ll")


class Transport(Enum):
    UDP = "udp"
    TCP = "tcp"


class Direction(Enum):
    SEND = "send"
    RECEIVE = "receive"
    DUPLEX = "duplex"

    @property
    def can_send(self) -> bool:
        return self is not Direction.RECEIVE

    @property
    def can_receive(self) -> bool:
        return self is not Direction.SEND


class ChannelError(OSError):
    pass


class ChannelClosed(ChannelError):
    pass


class ChannelTimeout(TimeoutError):
    pass


class PayloadTooLarge(ValueError):
    pass


def _check_port(port: int, what: str) -> None:
    if port != 0 and not 1024 <= port <= 65535:
        raise ValueError(f"{what} port must be 0 (ephemeral) or in [1024, 65535], got {port}")


@dataclass(frozen=True)
class ChannelConfig:
    name: str
    transport: Transport
    direction: Direction
    local: tuple[str, int] | None = None  # bind address; required to receive
    remote: tuple[str, int] | None = None  # peer address; required to send (TCP: connect target)
    payload_type: int = 0
    channel_id: int = 0

    def __post_init__(self) -> None:
        if self.local is not None:
            _check_port(self.local[1], "local")
        if self.remote is not None:
            _check_port(self.remote[1], "remote")
        if self.direction.can_receive and self.transport is Transport.UDP and self.local is None:
            raise ValueError(f"channel {self.name!r}: receiving over UDP requires a local address")
        if self.direction.can_send and self.transport is Transport.UDP and self.remote is None:
            raise ValueError(f"channel {self.name!r}: sending over UDP requires a remote address")
        if self.transport is Transport.TCP and self.local is None and self.remote is None:
            raise ValueError(f"channel {self.name!r}: TCP needs a local (listen) or remote (connect) address")


@dataclass(frozen=True)
class Received:
    envelope: MessageEnvelope
    receive_stamp: int  # ns, receiver clock
    latency_ms: float | None  # set only when a clock sync estimate exists


class Channel:
    """One open UDP socket or TCP stream carrying framed envelopes."""

    def __init__(self, config: ChannelConfig, clock_ns=time.time_ns):
        self.config = config
        self._clock_ns = clock_ns
        # kernel receive stamps share the wall-clock base; never mix them
        # with an injected (virtual or skewed) clock
        self._kernel_rx_stamps = clock_ns is time.time_ns
        self._send_lock = threading.Lock()
        self._sequence = 0
        self._last_delivered: int | None = None
        self._clock_offset_ms: float | None = None
        self._closed = False
        self._recv_buffer = b""
        self.sent_count = 0
        self.received_count = 0
        self.crc_drops = 0
        self.stale_drops = 0
        self._sock: socket.socket | None = None
        self._listener: socket.socket | None = None
        self._accept_lock = threading.Lock()

    # -- lifecycle -------------------------------------------------------

    def _open_udp(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.bind(self.config.local if self.config.local else ("0.0.0.0", 0))
            if self.config.direction.can_receive and self._kernel_rx_stamps:
                try:
                    sock.setsockopt(socket.SOL_SOCKET, _SO_TIMESTAMPNS, 1)
                except OSError:
                    self._kernel_rx_stamps = False
        except OSError:
            sock.close()
            raise
        self._sock = sock

    def _open_tcp(self, connect_retries: int, retry_interval_s: float, connect_timeout_s: float) -> None:
        if self.config.remote is not None:
            last_err: OSError | None = None
            for attempt in range(connect_retries + 1):
                sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
                sock.settimeout(connect_timeout_s)
                try:
                    if self.config.local is not None:
                        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
                        sock.bind(self.config.local)
                    sock.connect(self.config.remote)
                    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                    self._sock = sock
                    return
                except OSError as err:
                    sock.close()
                    last_err = err
                    if attempt < connect_retries:
                        time.sleep(retry_interval_s)
            raise ChannelTimeout(
                f"channel {self.config.name!r}: connect to {self.config.remote} failed: {last_err}"
            )
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind(self.config.local)
            listener.listen(1)
        except OSError:
            listener.close()
            raise
        self._listener = listener

    def _ensure_stream(self, timeout_s: float) -> socket.socket:
        """Return the TCP stream, accepting the peer on first use."""
        if self._sock is not None:
            return self._sock
        if self._listener is None:
            raise ChannelClosed(f"channel {self.config.name!r} has no socket")
        with self._accept_lock:
            if self._sock is None:
                self._listener.settimeout(timeout_s)
                try:
                    conn, _ = self._listener.accept()
                except socket.timeout as err:
                    raise ChannelTimeout(
                        f"channel {self.config.name!r}: no peer connected within {timeout_s:.1f}s"
                    ) from err
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._sock = conn
        return self._sock

    @property
    def local_address(self) -> tuple[str, int]:
        sock = self._sock or self._listener
        if sock is None:
            raise ChannelClosed("channel not open")
        return sock.getsockname()

    def close(self) -> None:
        self._closed = True
        for sock in (self._sock, self._listener):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        self._sock = None
        self._listener = None

    def __enter__(self) -> "Channel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- clock sync ------------------------------------------------------

    def set_clock_offset_ms(self, offset_ms: float) -> None:
        """Remote-minus-local offset used for one-way latency estimates."""
        self._clock_offset_ms = offset_ms

    @property
    def clock_offset_ms(self) -> float | None:
        return self._clock_offset_ms

    # -- I/O ---------------------------------------------------------------

    def _check_send(self, payload: bytes) -> None:
        if self._closed:
            raise ChannelClosed(f"channel {self.config.name!r} is closed")
        if not self.config.direction.can_send:
            raise ChannelError(f"channel {self.config.name!r} is receive-only")
        if self.config.transport is Transport.UDP and len(payload) > MAX_UDP_PAYLOAD:
            raise PayloadTooLarge(f"{len(payload)} bytes exceeds UDP ceiling of {MAX_UDP_PAYLOAD}")

    def _build_frame(self, payload: bytes, payload_type: int | None) -> tuple[int, bytes]:
        """Assign the next sequence and stamp, returning the encoded frame."""
        with self._send_lock:
            self._sequence += 1
            envelope = MessageEnvelope(
                channel_id=self.config.channel_id,
                payload_type=self.config.payload_type if payload_type is None else payload_type,
                sequence=self._sequence,
                send_stamp=self._clock_ns(),
                payload=payload,
            )
            return envelope.sequence, encode_envelope(envelope)

    def send(self, payload: bytes, payload_type: int | None = None, accept_timeout_s: float = 5.0) -> int:
        """Frame and write one message; returns the assigned sequence."""
        self._check_send(payload)
        sequence, frame = self._build_frame(payload, payload_type)
        self._write_frame(frame, accept_timeout_s)
        self.sent_count += 1
        return sequence

    def _write_frame(self, frame: bytes, accept_timeout_s: float) -> None:
        if self.config.transport is Transport.UDP:
            if self._sock is None:
                raise ChannelClosed("channel not open")
            self._sock.sendto(frame, self.config.remote)
        else:
            stream = self._ensure_stream(accept_timeout_s)
            try:
                stream.sendall(frame)
            except OSError as err:
                raise ChannelClosed(f"channel {self.config.name!r}: peer gone: {err}") from err

    def recv(self, timeout_ms: float = 1000.0) -> Received:
        """Deliver the next CRC-verified, non-stale envelope.

        CRC failures and stale UDP frames are counted and skipped without
        returning; the timeout budget covers the whole call.
        """
        if self._closed:
            raise ChannelClosed(f"channel {self.config.name!r} is closed")
        if not self.config.direction.can_receive:
            raise ChannelError(f"channel {self.config.name!r} is send-only")
        deadline = time.monotonic() + timeout_ms / 1000.0
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ChannelTimeout(f"channel {self.config.name!r}: no frame within {timeout_ms} ms")
            try:
                if self.config.transport is Transport.UDP:
                    envelope, kernel_stamp = self._recv_udp(remaining)
                else:
                    envelope, kernel_stamp = self._recv_tcp(remaining)
            except FrameError:
                self.crc_drops += 1
                continue
            receive_stamp = kernel_stamp if kernel_stamp is not None else self._clock_ns()
            if self.config.transport is Transport.UDP:
                if self._last_delivered is not None and envelope.sequence <= self._last_delivered:
                    self.stale_drops += 1
                    continue
                self._last_delivered = envelope.sequence
            self.received_count += 1
            latency_ms: float | None = None
            if self._clock_offset_ms is not None:
                latency_ms = (receive_stamp - envelope.send_stamp) / 1e6 - self._clock_offset_ms
            return Received(envelope, receive_stamp, latency_ms)

    def _recv_udp(self, timeout_s: float) -> tuple[MessageEnvelope, int | None]:
        if self._sock is None:
            raise ChannelClosed("channel not open")
        self._sock.settimeout(timeout_s)
        try:
            if self._kernel_rx_stamps:
                data, ancdata, _, _ = self._sock.recvmsg(_RECV_BUFSIZE, socket.CMSG_SPACE(_TIMESPEC.size))
                stamp = None
                for level, ctype, cdata in ancdata:
                    if level == socket.SOL_SOCKET and ctype == _SO_TIMESTAMPNS and len(cdata) >= _TIMESPEC.size:
                        sec, nsec = _TIMESPEC.unpack_from(cdata, 0)
                        stamp = sec * 1_000_000_000 + nsec
                return decode_envelope(data), stamp
            data, _ = self._sock.recvfrom(_RECV_BUFSIZE)
        except socket.timeout as err:
            raise ChannelTimeout(f"channel {self.config.name!r}: recv timeout") from err
        except OSError as err:
            if self._closed:
                raise ChannelClosed(f"channel {self.config.name!r} closed during recv") from err
            raise
        return decode_envelope(data), None

    def _recv_tcp(self, timeout_s: float) -> tuple[MessageEnvelope, int | None]:
        stream = self._ensure_stream(timeout_s)
        deadline = time.monotonic() + timeout_s
        header = self._read_exact(stream, HEADER_SIZE, deadline)
        total = frame_length_from_header(header)
        rest = self._read_exact(stream, total - HEADER_SIZE, deadline)
        return decode_envelope(header + rest), None

    def _read_exact(self, stream: socket.socket, n: int, deadline: float) -> bytes:
        while len(self._recv_buffer) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ChannelTimeout(f"channel {self.config.name!r}: recv timeout")
            stream.settimeout(remaining)
            try:
                chunk = stream.recv(_RECV_BUFSIZE)
            except socket.timeout as err:
                raise ChannelTimeout(f"channel {self.config.name!r}: recv timeout") from err
            except OSError as err:
                if self._closed:
                    raise ChannelClosed(f"channel {self.config.name!r} closed during recv") from err
                raise
            if not chunk:
                raise ChannelClosed(f"channel {self.config.name!r}: peer closed the stream")
            self._recv_buffer += chunk
        out, self._recv_buffer = self._recv_buffer[:n], self._recv_buffer[n:]
        return out


def open_channel(
    config: ChannelConfig,
    *,
    connect_retries: int = 3,
    retry_interval_s: float = 0.2,
    connect_timeout_s: float = 2.0,
    clock_ns=time.time_ns,
) -> Channel:
    """Open a channel per its config; TCP senders connect with retry."""
    channel = Channel(config, clock_ns=clock_ns)
    try:
        if config.transport is Transport.UDP:
            channel._open_udp()
        else:
            channel._open_tcp(connect_retries, retry_interval_s, connect_timeout_s)
    except Exception:
        channel.close()
        raise
    return channel
