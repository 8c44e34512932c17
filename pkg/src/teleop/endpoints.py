"""Channel wiring between the operator station and the vehicle agent.

One config file describes every stream of a session: transport, direction,
and the port on each host. Both sides derive their channel configs from
the same file, so start-up wiring stays consistent by construction.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from teleop.streams import (
    PT_CONFIG,
    PT_HEARTBEAT,
    PT_PRIMARY_COMMAND,
    PT_SYSTEM_STATUS,
    PT_TRAJECTORY,
    PT_VEHICLE_STATE,
    STREAM_COMMAND,
    STREAM_CONFIG,
    STREAM_HEARTBEAT,
    STREAM_STATE,
    STREAM_STATUS,
    STREAM_TRAJECTORY,
)
from teleop.transport.channel import ChannelConfig, Direction, Transport

_PAYLOAD_TYPES = {
    STREAM_COMMAND: PT_PRIMARY_COMMAND,
    STREAM_TRAJECTORY: PT_TRAJECTORY,
    STREAM_STATE: PT_VEHICLE_STATE,
    STREAM_STATUS: PT_SYSTEM_STATUS,
    STREAM_HEARTBEAT: PT_HEARTBEAT,
    STREAM_CONFIG: PT_CONFIG,
}


@dataclass(frozen=True)
class StreamSpec:
    name: str
    transport: Transport
    to: str | None  # "vehicle" | "operator" for one-way streams, None for duplex
    vehicle_port: int
    operator_port: int


@dataclass(frozen=True)
class EndpointConfig:
    operator_host: str
    vehicle_host: str
    streams: dict[str, StreamSpec]

    @classmethod
    def load(cls, path: str | Path) -> "EndpointConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"endpoint config not found: {path}")
        operator_host = parser.get("endpoints", "operator", fallback="127.0.0.1")
        vehicle_host = parser.get("endpoints", "vehicle", fallback="127.0.0.1")
        streams: dict[str, StreamSpec] = {}
        for section in parser.sections():
            if not section.startswith("stream:"):
                continue
            name = section.split(":", 1)[1]
            transport = Transport(parser.get(section, "transport", fallback="udp").lower())
            to = parser.get(section, "to", fallback=None)
            if to not in (None, "vehicle", "operator"):
                raise ValueError(f"stream {name!r}: 'to' must be vehicle or operator")
            port = parser.getint(section, "port", fallback=0)
            streams[name] = StreamSpec(
                name=name,
                transport=transport,
                to=to,
                vehicle_port=parser.getint(section, "vehicle_port", fallback=port if to == "vehicle" else 0),
                operator_port=parser.getint(section, "operator_port", fallback=port if to == "operator" else 0),
            )
        return cls(operator_host=operator_host, vehicle_host=vehicle_host, streams=streams)

    @classmethod
    def loopback(cls, base_port: int = 47400) -> "EndpointConfig":
        """All six session streams on sequential loopback ports."""
        p = base_port
        return cls(
            operator_host="127.0.0.1",
            vehicle_host="127.0.0.1",
            streams={
                STREAM_COMMAND: StreamSpec(STREAM_COMMAND, Transport.UDP, "vehicle", p, 0),
                STREAM_TRAJECTORY: StreamSpec(STREAM_TRAJECTORY, Transport.TCP, "vehicle", p + 1, 0),
                STREAM_STATE: StreamSpec(STREAM_STATE, Transport.UDP, "operator", 0, p + 2),
                STREAM_STATUS: StreamSpec(STREAM_STATUS, Transport.UDP, "operator", 0, p + 3),
                STREAM_HEARTBEAT: StreamSpec(STREAM_HEARTBEAT, Transport.UDP, None, p + 4, p + 5),
                STREAM_CONFIG: StreamSpec(STREAM_CONFIG, Transport.UDP, None, p + 6, p + 7),
            },
        )

    def _duplex(self, name: str, side: str) -> ChannelConfig:
        spec = self.streams[name]
        if side == "operator":
            local = (self.operator_host, spec.operator_port)
            remote = (self.vehicle_host, spec.vehicle_port)
        else:
            local = (self.vehicle_host, spec.vehicle_port)
            remote = (self.operator_host, spec.operator_port)
        return ChannelConfig(
            name=name,
            transport=spec.transport,
            direction=Direction.DUPLEX,
            local=local,
            remote=remote,
            payload_type=_PAYLOAD_TYPES.get(name, 0),
        )

    def channel_for(self, name: str, side: str) -> ChannelConfig:
        """Channel config for one stream as seen from ``side``."""
        if side not in ("operator", "vehicle"):
            raise ValueError("side must be 'operator' or 'vehicle'")
        spec = self.streams[name]
        if spec.to is None:
            return self._duplex(name, side)
        receiving = spec.to == side
        dest_host = self.vehicle_host if spec.to == "vehicle" else self.operator_host
        dest_port = spec.vehicle_port if spec.to == "vehicle" else spec.operator_port
        if spec.transport is Transport.TCP:
            # receiver listens, sender connects; the stream stays duplex so
            # acknowledgements can ride the same connection
            if receiving:
                return ChannelConfig(
                    name=name, transport=spec.transport, direction=Direction.DUPLEX,
                    local=(dest_host, dest_port), payload_type=_PAYLOAD_TYPES.get(name, 0),
                )
            return ChannelConfig(
                name=name, transport=spec.transport, direction=Direction.DUPLEX,
                remote=(dest_host, dest_port), payload_type=_PAYLOAD_TYPES.get(name, 0),
            )
        if receiving:
            return ChannelConfig(
                name=name, transport=spec.transport, direction=Direction.RECEIVE,
                local=(dest_host, dest_port), payload_type=_PAYLOAD_TYPES.get(name, 0),
            )
        return ChannelConfig(
            name=name, transport=spec.transport, direction=Direction.SEND,
            local=None, remote=(dest_host, dest_port), payload_type=_PAYLOAD_TYPES.get(name, 0),
        )

    def dump(self, path: str | Path) -> None:
        parser = configparser.ConfigParser()
        parser["endpoints"] = {"operator": self.operator_host, "vehicle": self.vehicle_host}
        for name, spec in self.streams.items():
            section = f"stream:{name}"
            parser[section] = {"transport": spec.transport.value}
            if spec.to is not None:
                parser[section]["to"] = spec.to
                parser[section]["port"] = str(spec.vehicle_port if spec.to == "vehicle" else spec.operator_port)
            else:
                parser[section]["vehicle_port"] = str(spec.vehicle_port)
                parser[section]["operator_port"] = str(spec.operator_port)
        with Path(path).open("w", encoding="utf-8") as fh:
            parser.write(fh)
