"""Run-time parameter requests bridged across the link.

Reliable request/response on top of a duplex channel: each request carries
a fresh id, times out and retries, and the responder deduplicates by id so
a retried request is applied at most once (the cached response is
replayed).
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Callable

from teleop.streams import PT_CONFIG
from teleop.transport.channel import Channel, ChannelTimeout


class ConfigTimeout(TimeoutError):
    pass


@dataclass(frozen=True)
class Ack:
    key: str
    value: str
    request_id: str


@dataclass(frozen=True)
class Rejection:
    key: str
    reason: str
    request_id: str


class ConfigResponder:
    """Applies key/value requests through a setter, deduplicating by id.

    ``setter(key, value)`` returns None on success or a rejection reason
    string; unknown keys must be rejected by the setter.
    """

    def __init__(self, channel=None, setter: Callable[[str, str], str | None] = lambda k, v: "unknown key"):
        self._channel = channel
        self._setter = setter
        self._seen: dict[str, dict] = {}
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.applied_count = 0

    def start(self) -> "ConfigResponder":
        if self._channel is None:
            raise ValueError("cannot serve without a channel")
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def __enter__(self) -> "ConfigResponder":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def handle_request(self, request: dict) -> dict:
        request_id = request["id"]
        cached = self._seen.get(request_id)
        if cached is not None:
            return cached
        reason = self._setter(request["key"], request["value"])
        if reason is None:
            self.applied_count += 1
            response = {"id": request_id, "key": request["key"], "value": request["value"], "ok": True}
        else:
            response = {"id": request_id, "key": request["key"], "ok": False, "reason": reason}
        self._seen[request_id] = response
        return response

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                received = self._channel.recv(timeout_ms=100.0)
            except ChannelTimeout:
                continue
            except OSError:
                return
            if received.envelope.payload_type != PT_CONFIG:
                continue
            try:
                request = json.loads(received.envelope.payload.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                continue
            if request.get("op") != "set":
                continue
            response = self.handle_request(request)
            try:
                self._channel.send(json.dumps(response).encode("utf-8"), PT_CONFIG)
            except OSError:
                return


def config_request(
    channel: Channel,
    key: str,
    value: str,
    *,
    timeout_ms: float = 500.0,
    retries: int = 2,
) -> Ack | Rejection:
    """Set one parameter on the remote side, retrying on timeout."""
    request_id = uuid.uuid4().hex
    payload = json.dumps({"op": "set", "id": request_id, "key": key, "value": str(value)}).encode("utf-8")
    attempts = retries + 1
    for _ in range(attempts):
        channel.send(payload, PT_CONFIG)
        deadline = time.monotonic() + timeout_ms / 1000.0
        while True:
            remaining_ms = (deadline - time.monotonic()) * 1000.0
            if remaining_ms <= 0:
                break
            try:
                received = channel.recv(timeout_ms=remaining_ms)
            except ChannelTimeout:
                break
            if received.envelope.payload_type != PT_CONFIG:
                continue
            try:
                response = json.loads(received.envelope.payload.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                continue
            if response.get("id") != request_id:
                continue
            if response.get("ok"):
                return Ack(key=key, value=str(value), request_id=request_id)
            return Rejection(key=key, reason=response.get("reason", "rejected"), request_id=request_id)
    raise ConfigTimeout(f"no response for {key!r} after {attempts} attempts")
