"""Coupled operator and vehicle session state machines with heartbeats.

The operator side has three states (IDLE, UPLINK, TELEOPERATION), the
vehicle side the reduced two (IDLE, UPLINK). A periodic heartbeat keeps
them consistent; a sustained heartbeat gap drives both back to IDLE.
Teleoperation activity and the selected concept ride in the heartbeat
payload as session metadata rather than as a vehicle state.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum

HEARTBEAT_RATE_HZ = 10.0
HEARTBEAT_TIMEOUT_MS = 500.0


class OperatorState(Enum):
    IDLE = "IDLE"
    UPLINK = "UPLINK"
    TELEOPERATION = "TELEOPERATION"


class VehicleSmState(Enum):
    IDLE = "IDLE"
    UPLINK = "UPLINK"


class SmEvent(Enum):
    CONNECT = "Connect"
    DISCONNECT = "Disconnect"
    START_TELEOPERATION = "StartTeleoperation"
    STOP_TELEOPERATION = "StopTeleoperation"
    HEARTBEAT_LOST = "HeartbeatLost"


class InvalidTransition(Exception):
    def __init__(self, state, event):
        super().__init__(f"no transition from {state.name} on {event.value}")
        self.state = state
        self.event = event


_OPERATOR_TABLE: dict[tuple[OperatorState, SmEvent], OperatorState] = {
    (OperatorState.IDLE, SmEvent.CONNECT): OperatorState.UPLINK,
    (OperatorState.UPLINK, SmEvent.START_TELEOPERATION): OperatorState.TELEOPERATION,
    (OperatorState.TELEOPERATION, SmEvent.STOP_TELEOPERATION): OperatorState.UPLINK,
    (OperatorState.UPLINK, SmEvent.DISCONNECT): OperatorState.IDLE,
    (OperatorState.TELEOPERATION, SmEvent.DISCONNECT): OperatorState.IDLE,
    (OperatorState.UPLINK, SmEvent.HEARTBEAT_LOST): OperatorState.IDLE,
    (OperatorState.TELEOPERATION, SmEvent.HEARTBEAT_LOST): OperatorState.IDLE,
}

# Start/stop teleoperation are operator-side events; the vehicle learns the
# teleoperation flag from the heartbeat payload instead.
_VEHICLE_TABLE: dict[tuple[VehicleSmState, SmEvent], VehicleSmState] = {
    (VehicleSmState.IDLE, SmEvent.CONNECT): VehicleSmState.UPLINK,
    (VehicleSmState.UPLINK, SmEvent.DISCONNECT): VehicleSmState.IDLE,
    (VehicleSmState.UPLINK, SmEvent.HEARTBEAT_LOST): VehicleSmState.IDLE,
}


def operator_transition(state: OperatorState, event: SmEvent) -> OperatorState:
    try:
        return _OPERATOR_TABLE[(state, event)]
    except KeyError:
        raise InvalidTransition(state, event) from None


def vehicle_transition(state: VehicleSmState, event: SmEvent) -> VehicleSmState:
    try:
        return _VEHICLE_TABLE[(state, event)]
    except KeyError:
        raise InvalidTransition(state, event) from None


class HeartbeatVerdict(Enum):
    ALIVE = "Alive"
    LOST = "Lost"


def evaluate_heartbeats(last_rx_stamp_ns: int, now_ns: int, timeout_ms: float = HEARTBEAT_TIMEOUT_MS) -> HeartbeatVerdict:
    """Lost iff the gap strictly exceeds the timeout."""
    if timeout_ms <= 0:
        raise ValueError("timeout_ms must be > 0")
    gap_ms = (now_ns - last_rx_stamp_ns) / 1e6
    return HeartbeatVerdict.LOST if gap_ms > timeout_ms else HeartbeatVerdict.ALIVE


@dataclass(frozen=True)
class Heartbeat:
    sender_state: str  # OperatorState / VehicleSmState name
    stamp: int  # ns
    sequence: int
    teleoperation_active: bool = False
    concept: str | None = None  # "direct" | "trajectory", operator side only

    def encode(self) -> bytes:
        return json.dumps(
            {
                "state": self.sender_state,
                "stamp": self.stamp,
                "sequence": self.sequence,
                "teleop": self.teleoperation_active,
                "concept": self.concept,
            }
        ).encode("utf-8")

    @classmethod
    def decode(cls, payload: bytes) -> "Heartbeat":
        data = json.loads(payload.decode("utf-8"))
        return cls(
            sender_state=data["state"],
            stamp=int(data["stamp"]),
            sequence=int(data["sequence"]),
            teleoperation_active=bool(data.get("teleop", False)),
            concept=data.get("concept"),
        )


class StateMachineHost:
    """Thread-confined state machine with linearizable snapshot reads.

    Transitions run on the owner's thread; ``state`` may be read from any
    thread and always returns the post-transition value.
    """

    def __init__(self, transition, initial):
        self._transition = transition
        self._state = initial
        self._lock = threading.Lock()

    @property
    def state(self):
        with self._lock:
            return self._state

    def apply(self, event: SmEvent):
        with self._lock:
            self._state = self._transition(self._state, event)
            return self._state

    def try_apply(self, event: SmEvent):
        """Apply if valid, else keep state; returns (state, applied)."""
        with self._lock:
            try:
                self._state = self._transition(self._state, event)
            except InvalidTransition:
                return self._state, False
            return self._state, True
