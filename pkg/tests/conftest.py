from __future__ import annotations

import random
import socket

import pytest

from teleop.domain import PlatformConfig
from teleop.endpoints import EndpointConfig


def _free_port(kind: int) -> int:
    with socket.socket(socket.AF_INET, kind) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _block_free(base: int, n: int = 8) -> bool:
    for offset in range(n):
        for kind in (socket.SOCK_DGRAM, socket.SOCK_STREAM):
            try:
                with socket.socket(socket.AF_INET, kind) as sock:
                    sock.bind(("127.0.0.1", base + offset))
            except OSError:
                return False
    return True


def loopback_endpoints() -> EndpointConfig:
    """Endpoint config on a free block of sequential loopback ports."""
    rng = random.Random()
    for _ in range(50):
        base = rng.randrange(30000, 59000)
        if _block_free(base):
            return EndpointConfig.loopback(base_port=base)
    raise OSError("no free port block found")


@pytest.fixture
def endpoints() -> EndpointConfig:
    return loopback_endpoints()


@pytest.fixture
def udp_port() -> int:
    return _free_port(socket.SOCK_DGRAM)


@pytest.fixture
def tcp_port() -> int:
    return _free_port(socket.SOCK_STREAM)


@pytest.fixture
def udp_ports():
    def allocate(n: int) -> list[int]:
        return [_free_port(socket.SOCK_DGRAM) for _ in range(n)]

    return allocate


@pytest.fixture
def platform() -> PlatformConfig:
    return PlatformConfig()
