"""Real-time wrapper running a VehicleAgent over session channels.

Receive threads deposit into the agent's mailboxes; a 50 Hz tick thread
drives the control period, publishes vehicle state every tick and system
status plus heartbeat at 10 Hz, and answers clock probes and run-time
config requests on the config channel.
"""

from __future__ import annotations

import json
import struct
import threading
import time
from dataclasses import replace

from teleop.domain import (
    PlatformConfig,
    decode_primary_command,
    decode_secondary_command,
    decode_trajectory,
    encode_vehicle_state,
    object_to_dict,
    polyline_to_dict,
)
from teleop.endpoints import EndpointConfig
from teleop.runlog import NullLogger
from teleop.safety import SafetyConfig
from teleop.state_machine import Heartbeat, VehicleSmState
from teleop.streams import (
    PT_CLOCK_PROBE,
    PT_CONFIG,
    PT_HEARTBEAT,
    PT_MAP,
    PT_OBJECTS,
    PT_PRIMARY_COMMAND,
    PT_SECONDARY_COMMAND,
    PT_SYSTEM_STATUS,
    PT_TRAJECTORY,
    PT_TRAJECTORY_ACK,
    STREAM_COMMAND,
    STREAM_CONFIG,
    STREAM_HEARTBEAT,
    STREAM_STATE,
    STREAM_STATUS,
    STREAM_TRAJECTORY,
)
from teleop.transport.channel import Channel, ChannelTimeout, open_channel
from teleop.transport.config_service import ConfigResponder
from teleop.vehicle_agent import SimVehicleInterface, TICK_PERIOD_S, VehicleAgent, VehicleInterface

_PROBE = struct.Struct("<BQQQ")
_ACK = struct.Struct("<I")

# config keys adjustable at run time, mapped onto SafetyConfig fields
_SAFETY_KEYS = {
    "safety.command_timeout_ms": "command_timeout_ms",
    "safety.latency_restrict_threshold_ms": "latency_restrict_threshold_ms",
    "safety.latency_stop_threshold_ms": "latency_stop_threshold_ms",
    "safety.restricted_vmax_mps": "restricted_vmax_mps",
    "safety.safe_stop_decel_mps2": "safe_stop_decel_mps2",
}


class VehicleAgentService:
    """Vehicle-side process: channels, loops, and the agent core."""

    def __init__(
        self,
        endpoints: EndpointConfig,
        platform: PlatformConfig,
        interface: VehicleInterface,
        safety_cfg: SafetyConfig | None = None,
        *,
        logger=None,
        clock_ns=time.time_ns,
        tick_period_s: float = TICK_PERIOD_S,
        step_simulation: bool = True,
    ):
        self.endpoints = endpoints
        self.platform = platform
        self.interface = interface
        self.log = logger or NullLogger()
        self._clock_ns = clock_ns
        self.tick_period_s = tick_period_s
        self.step_simulation = step_simulation and isinstance(interface, SimVehicleInterface)
        self.agent = VehicleAgent(
            platform, interface, safety_cfg, tick_period_s=tick_period_s, logger=self.log
        )
        self._channels: dict[str, Channel] = {}
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._hb_sequence = 0
        self._scene_sent = 0.0

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "VehicleAgentService":
        for name in (STREAM_COMMAND, STREAM_TRAJECTORY, STREAM_STATE, STREAM_STATUS, STREAM_HEARTBEAT, STREAM_CONFIG):
            self._channels[name] = open_channel(self.endpoints.channel_for(name, "vehicle"))
        self._stop.clear()
        self._threads = [
            threading.Thread(target=self._tick_loop, daemon=True, name="veh-tick"),
            threading.Thread(target=self._command_loop, daemon=True, name="veh-cmd"),
            threading.Thread(target=self._trajectory_loop, daemon=True, name="veh-traj"),
            threading.Thread(target=self._heartbeat_loop, daemon=True, name="veh-hb"),
            threading.Thread(target=self._config_loop, daemon=True, name="veh-cfg"),
        ]
        for thread in self._threads:
            thread.start()
        self.log.emit("vehicle_service", "started", {"platform": self.platform.name})
        return self

    def stop(self) -> None:
        self._stop.set()
        for channel in self._channels.values():
            channel.close()
        for thread in self._threads:
            thread.join(timeout=2.0)
        self._threads = []
        self._channels = {}
        self.log.emit("vehicle_service", "stopped", {})

    def __enter__(self) -> "VehicleAgentService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- loops ------------------------------------------------------------------

    def _tick_loop(self) -> None:
        period = self.tick_period_s
        status_every = max(1, round(1.0 / (10.0 * period)))  # 10 Hz
        tick_index = 0
        next_tick = time.monotonic()
        while not self._stop.is_set():
            next_tick += period
            delay = next_tick - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            now = self._clock_ns()
            result = self.agent.tick(now)
            if self.step_simulation:
                self.interface.vehicle.advance(period)
            # vehicle data flows only while a session is up (UPLINK)
            if self.agent.state_machine.state is VehicleSmState.UPLINK:
                state_channel = self._channels.get(STREAM_STATE)
                if state_channel is not None and result.state is not None:
                    try:
                        state_channel.send(encode_vehicle_state(result.state))
                    except OSError:
                        pass
                if tick_index % status_every == 0:
                    self._publish_status(result)
                    self._send_heartbeat()
                    self._maybe_send_scene(now)
            tick_index += 1

    def _publish_status(self, result) -> None:
        channel = self._channels.get(STREAM_STATUS)
        if channel is None:
            return
        try:
            channel.send(json.dumps(result.status.to_dict()).encode("utf-8"), PT_SYSTEM_STATUS)
        except OSError:
            pass

    def _maybe_send_scene(self, now_ns: int) -> None:
        # objects and map refresh at 1 Hz; they are static scenario data
        if now_ns - self._scene_sent < 1e9:
            return
        self._scene_sent = now_ns
        channel = self._channels.get(STREAM_STATUS)
        if channel is None:
            return
        try:
            objects = [object_to_dict(o) for o in self.interface.perceived_objects()]
            polylines = [polyline_to_dict(p) for p in self.interface.map_polylines()]
            channel.send(json.dumps(objects).encode("utf-8"), PT_OBJECTS)
            channel.send(json.dumps(polylines).encode("utf-8"), PT_MAP)
        except OSError:
            pass

    def _send_heartbeat(self) -> None:
        channel = self._channels.get(STREAM_HEARTBEAT)
        if channel is None:
            return
        self._hb_sequence += 1
        hb = Heartbeat(self.agent.state_machine.state.value, self._clock_ns(), self._hb_sequence)
        try:
            channel.send(hb.encode(), PT_HEARTBEAT)
        except OSError:
            pass

    def _command_loop(self) -> None:
        channel = self._channels[STREAM_COMMAND]
        while not self._stop.is_set():
            try:
                received = channel.recv(timeout_ms=200.0)
            except ChannelTimeout:
                continue
            except OSError:
                return
            if received.envelope.payload_type == PT_PRIMARY_COMMAND:
                command = decode_primary_command(received.envelope.payload)
                self.agent.ingest_command(
                    command,
                    received.envelope.send_stamp,
                    received.receive_stamp,
                    len(received.envelope.payload),
                    received.envelope.sequence,
                )
            elif received.envelope.payload_type == PT_SECONDARY_COMMAND:
                self.agent.ingest_secondary(decode_secondary_command(received.envelope.payload))

    def _trajectory_loop(self) -> None:
        channel = self._channels[STREAM_TRAJECTORY]
        while not self._stop.is_set():
            try:
                received = channel.recv(timeout_ms=200.0)
            except ChannelTimeout:
                continue
            except OSError:
                return
            if received.envelope.payload_type != PT_TRAJECTORY:
                continue
            trajectory = decode_trajectory(received.envelope.payload)
            from teleop.domain import validate_trajectory

            result = validate_trajectory(trajectory, self.platform)
            if not result.ok:
                self.log.emit(
                    "vehicle_service", "trajectory_rejected",
                    {"id": trajectory.id, "violations": [str(v) for v in result.violations]},
                    severity="warn",
                )
                continue  # no ack: the committer treats this as a failed commit
            acked = self.agent.ingest_trajectory(trajectory)
            try:
                channel.send(_ACK.pack(acked), PT_TRAJECTORY_ACK)
            except OSError:
                return

    def _heartbeat_loop(self) -> None:
        channel = self._channels[STREAM_HEARTBEAT]
        while not self._stop.is_set():
            try:
                received = channel.recv(timeout_ms=200.0)
            except ChannelTimeout:
                continue
            except OSError:
                return
            if received.envelope.payload_type != PT_HEARTBEAT:
                continue
            hb = Heartbeat.decode(received.envelope.payload)
            self.agent.ingest_heartbeat(
                hb, received.receive_stamp, len(received.envelope.payload), received.envelope.sequence
            )

    def _set_config(self, key: str, value: str) -> str | None:
        if key not in _SAFETY_KEYS:
            return "unknown key"
        field = _SAFETY_KEYS[key]
        try:
            new_cfg = replace(self.agent.safety_cfg, **{field: float(value)})
        except (TypeError, ValueError) as err:
            return f"invalid value: {err}"
        self.agent.safety_cfg = new_cfg
        self.agent.gate.cfg = new_cfg
        self.log.emit("vehicle_service", "config_applied", {"key": key, "value": value})
        return None

    def _config_loop(self) -> None:
        channel = self._channels[STREAM_CONFIG]
        responder = ConfigResponder(setter=self._set_config)
        while not self._stop.is_set():
            try:
                received = channel.recv(timeout_ms=200.0)
            except ChannelTimeout:
                continue
            except OSError:
                return
            payload_type = received.envelope.payload_type
            try:
                if payload_type == PT_CLOCK_PROBE:
                    kind, t1, _, _ = _PROBE.unpack(received.envelope.payload)
                    if kind != 0:
                        continue
                    t2 = self._clock_ns()
                    channel.send(_PROBE.pack(1, t1, t2, self._clock_ns()), PT_CLOCK_PROBE)
                elif payload_type == PT_CONFIG:
                    request = json.loads(received.envelope.payload.decode("utf-8"))
                    if request.get("op") != "set":
                        continue
                    response = responder.handle_request(request)
                    channel.send(json.dumps(response).encode("utf-8"), PT_CONFIG)
            except OSError:
                return
            except (ValueError, KeyError, struct.error):
                continue
