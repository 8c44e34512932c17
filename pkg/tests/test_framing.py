from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from teleop.transport.framing import (
    HEADER_SIZE,
    TRAILER_SIZE,
    FrameError,
    MessageEnvelope,
    decode_envelope,
    encode_envelope,
    frame_length_from_header,
)


def sample_envelope(payload=b"steering+velocity"):
    return MessageEnvelope(channel_id=3, payload_type=1, sequence=17, send_stamp=1_700_000_000_000_000_000, payload=payload)


class TestRoundTrip:
    @given(
        st.integers(min_value=0, max_value=0xFFFF),
        st.integers(min_value=0, max_value=0xFFFF),
        st.integers(min_value=0, max_value=0xFFFFFFFF),
        st.integers(min_value=0, max_value=2**64 - 1),
        st.binary(max_size=2048),
    )
    def test_decode_encode_identity(self, channel_id, payload_type, sequence, stamp, payload):
        envelope = MessageEnvelope(channel_id, payload_type, sequence, stamp, payload)
        assert decode_envelope(encode_envelope(envelope)) == envelope

    def test_frame_layout_size(self):
        env = sample_envelope(b"xyz")
        assert len(encode_envelope(env)) == HEADER_SIZE + 3 + TRAILER_SIZE

    def test_frame_length_from_header(self):
        frame = encode_envelope(sample_envelope(b"abcd"))
        assert frame_length_from_header(frame[:HEADER_SIZE]) == len(frame)


class TestCorruptionRejection:
    def test_every_single_byte_flip_rejected(self):
        frame = bytearray(encode_envelope(sample_envelope()))
        for position in range(len(frame)):
            corrupted = bytearray(frame)
            corrupted[position] ^= 0xFF
            with pytest.raises(FrameError):
                decode_envelope(bytes(corrupted))

    def test_every_single_bit_flip_rejected(self):
        frame = bytearray(encode_envelope(sample_envelope(b"q")))
        for position in range(len(frame)):
            for bit in range(8):
                corrupted = bytearray(frame)
                corrupted[position] ^= 1 << bit
                with pytest.raises(FrameError):
                    decode_envelope(bytes(corrupted))

    def test_truncated_rejected(self):
        frame = encode_envelope(sample_envelope())
        for cut in (0, 5, HEADER_SIZE, len(frame) - 1):
            with pytest.raises(FrameError):
                decode_envelope(frame[:cut])

    def test_bad_magic(self):
        frame = bytearray(encode_envelope(sample_envelope()))
        frame[0:4] = b"NOPE"
        with pytest.raises(FrameError, match="magic"):
            decode_envelope(bytes(frame))

    def test_unsupported_version(self):
        frame = bytearray(encode_envelope(sample_envelope()))
        frame[4] = 99
        with pytest.raises(FrameError, match="version"):
            decode_envelope(bytes(frame))
