from __future__ import annotations

import time

import pytest

from teleop.transport.channel import ChannelConfig, Direction, Transport, open_channel
from teleop.transport.config_service import Ack, ConfigResponder, ConfigTimeout, Rejection, config_request


class SettableRegistry:
    def __init__(self):
        self.values = {"safety.command_timeout_ms": "500"}

    def set(self, key: str, value: str) -> str | None:
        if key not in self.values:
            return "unknown key"
        self.values[key] = value
        return None


def duplex_pair(udp_ports):
    pa, pb = udp_ports(2)
    a = open_channel(
        ChannelConfig("op", Transport.UDP, Direction.DUPLEX, local=("127.0.0.1", pa), remote=("127.0.0.1", pb))
    )
    b = open_channel(
        ChannelConfig("veh", Transport.UDP, Direction.DUPLEX, local=("127.0.0.1", pb), remote=("127.0.0.1", pa))
    )
    return a, b


class TestConfigRequest:
    def test_set_known_key_acked(self, udp_ports):
        operator, vehicle = duplex_pair(udp_ports)
        registry = SettableRegistry()
        with ConfigResponder(vehicle, registry.set):
            result = config_request(operator, "safety.command_timeout_ms", "500")
            assert isinstance(result, Ack)
            assert registry.values["safety.command_timeout_ms"] == "500"
        operator.close()
        vehicle.close()

    def test_unknown_key_rejected(self, udp_ports):
        operator, vehicle = duplex_pair(udp_ports)
        with ConfigResponder(vehicle, SettableRegistry().set):
            result = config_request(operator, "no.such.key", "1")
            assert isinstance(result, Rejection)
            assert "unknown key" in result.reason
        operator.close()
        vehicle.close()

    def test_timeout_after_retries(self, udp_ports):
        operator, vehicle = duplex_pair(udp_ports)
        vehicle.close()  # nobody answering
        start = time.monotonic()
        with pytest.raises(ConfigTimeout):
            config_request(operator, "safety.command_timeout_ms", "1", timeout_ms=100, retries=2)
        assert time.monotonic() - start >= 0.3  # three attempts worth of waiting
        operator.close()

    def test_duplicate_request_id_applied_once(self):
        registry = SettableRegistry()
        responder = ConfigResponder(setter=registry.set)
        request = {"op": "set", "id": "abc", "key": "safety.command_timeout_ms", "value": "250"}
        first = responder.handle_request(request)
        second = responder.handle_request(request)  # retry after a lost ack
        assert first == second
        assert first["ok"] is True
        assert responder.applied_count == 1
