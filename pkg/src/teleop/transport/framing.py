"""Wire format: versioned, sequenced, CRC-protected message frames.

Fixed little-endian layout:

    magic          4 bytes  b"TLOP"
    version        u8
    channel_id     u16
    payload_type   u16
    sequence       u32
    send_stamp     u64      ns since epoch
    payload_length u32
    payload        payload_length bytes
    crc32          u32      over all preceding bytes

The format is middleware-free and bit-exact so frames can be tested and
replayed byte for byte.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

MAGIC = b"TLOP"
VERSION = 1

_HEADER = struct.Struct("<4sBHHIQI")
_CRC = struct.Struct("<I")

HEADER_SIZE = _HEADER.size  # 25
TRAILER_SIZE = _CRC.size  # 4

# Sanity cap so a corrupted length field cannot trigger huge allocations.
MAX_PAYLOAD_LENGTH = 1 << 20


class FrameError(ValueError):
    """Raised when a byte buffer is not a well-formed frame."""


@dataclass(frozen=True)
class MessageEnvelope:
    channel_id: int
    payload_type: int
    sequence: int
    send_stamp: int  # ns
    payload: bytes
    version: int = VERSION

    def __post_init__(self) -> None:
        if not 0 <= self.channel_id <= 0xFFFF:
            raise ValueError("channel_id out of u16 range")
        if not 0 <= self.payload_type <= 0xFFFF:
            raise ValueError("payload_type out of u16 range")
        if not 0 <= self.sequence <= 0xFFFFFFFF:
            raise ValueError("sequence out of u32 range")
        if not 0 <= self.send_stamp <= 0xFFFFFFFFFFFFFFFF:
            raise ValueError("send_stamp out of u64 range")


def encode_envelope(envelope: MessageEnvelope) -> bytes:
    header = _HEADER.pack(
        MAGIC,
        envelope.version,
        envelope.channel_id,
        envelope.payload_type,
        envelope.sequence,
        envelope.send_stamp,
        len(envelope.payload),
    )
    body = header + envelope.payload
    return body + _CRC.pack(zlib.crc32(body))


def decode_envelope(buffer: bytes) -> MessageEnvelope:
    """Decode one frame, raising FrameError on any malformed input."""
    if len(buffer) < HEADER_SIZE + TRAILER_SIZE:
        raise FrameError(f"frame too short: {len(buffer)} bytes")
    magic, version, channel_id, payload_type, sequence, send_stamp, payload_length = (
        _HEADER.unpack_from(buffer, 0)
    )
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameError(f"unsupported version {version}")
    if payload_length > MAX_PAYLOAD_LENGTH:
        raise FrameError(f"payload_length {payload_length} exceeds cap")
    expected = HEADER_SIZE + payload_length + TRAILER_SIZE
    if len(buffer) != expected:
        raise FrameError(f"length mismatch: have {len(buffer)}, header says {expected}")
    body = buffer[: HEADER_SIZE + payload_length]
    (crc,) = _CRC.unpack_from(buffer, HEADER_SIZE + payload_length)
    if zlib.crc32(body) != crc:
        raise FrameError("crc mismatch")
    return MessageEnvelope(
        channel_id=channel_id,
        payload_type=payload_type,
        sequence=sequence,
        send_stamp=send_stamp,
        payload=bytes(buffer[HEADER_SIZE : HEADER_SIZE + payload_length]),
        version=version,
    )


def frame_length_from_header(header: bytes) -> int:
    """Total frame size implied by a header buffer (for stream reads)."""
    if len(header) < HEADER_SIZE:
        raise FrameError("incomplete header")
    magic, version, _, _, _, _, payload_length = _HEADER.unpack_from(header, 0)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameError(f"unsupported version {version}")
    if payload_length > MAX_PAYLOAD_LENGTH:
        raise FrameError(f"payload_length {payload_length} exceeds cap")
    return HEADER_SIZE + payload_length + TRAILER_SIZE
