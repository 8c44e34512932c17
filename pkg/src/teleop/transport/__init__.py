"""Low-latency message channels over UDP and TCP.

Fixed binary framing with CRC32, per-channel sequencing and send stamps,
stale rejection on UDP, a request/response config channel, NTP-style clock
offset estimation, and a seeded network impairment shim for desk-scale
experiments.
"""

from teleop.transport.framing import (
    FrameError,
    MessageEnvelope,
    decode_envelope,
    encode_envelope,
    HEADER_SIZE,
    TRAILER_SIZE,
)
from teleop.transport.channel import (
    Channel,
    ChannelConfig,
    ChannelClosed,
    ChannelTimeout,
    Direction,
    PayloadTooLarge,
    Received,
    Transport,
    open_channel,
    MAX_UDP_PAYLOAD,
)
from teleop.transport.impair import DelayModel, ImpairedChannel, ImpairmentConfig, impair
from teleop.transport.clock_sync import (
    ClockSyncEstimate,
    ClockSyncError,
    EchoResponder,
    estimate_clock_offset,
)
from teleop.transport.config_service import (
    Ack,
    ConfigResponder,
    ConfigTimeout,
    Rejection,
    config_request,
)

__all__ = [
    "Ack",
    "Channel",
    "ChannelClosed",
    "ChannelConfig",
    "ChannelTimeout",
    "ClockSyncError",
    "ClockSyncEstimate",
    "ConfigResponder",
    "ConfigTimeout",
    "DelayModel",
    "Direction",
    "EchoResponder",
    "FrameError",
    "HEADER_SIZE",
    "ImpairedChannel",
    "ImpairmentConfig",
    "MAX_UDP_PAYLOAD",
    "MessageEnvelope",
    "PayloadTooLarge",
    "Received",
    "Rejection",
    "TRAILER_SIZE",
    "Transport",
    "config_request",
    "decode_envelope",
    "encode_envelope",
    "estimate_clock_offset",
    "impair",
    "open_channel",
]
