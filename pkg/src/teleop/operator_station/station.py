"""Operator-side session manager and control loops.

Owns the operator state machine, opens every session channel, performs
clock sync against the vehicle, streams commands at a fixed cadence in
direct-control mode, commits edited trajectories over the reliable
channel, and aggregates everything into status snapshots for the UI
gateway. Three loops run while connected: command (50 Hz), session
heartbeat/status (10 Hz), and the transport receive threads.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from teleop.domain import (
    Concept,
    PlatformConfig,
    SecondaryControlCommand,
    VehicleState,
    decode_vehicle_state,
    encode_secondary_command,
    encode_trajectory,
    object_from_dict,
    polyline_from_dict,
)
from teleop.endpoints import EndpointConfig
from teleop.monitoring import StateSnapshot, StreamMonitor, SystemStatus, fuse_status
from teleop.operator_station.input_mapping import CommandPipeline, InputFrame
from teleop.operator_station.trajectory_editor import TrajectoryDraft
from teleop.runlog import NullLogger
from teleop.state_machine import (
    HEARTBEAT_TIMEOUT_MS,
    Heartbeat,
    HeartbeatVerdict,
    InvalidTransition,
    OperatorState,
    SmEvent,
    StateMachineHost,
    evaluate_heartbeats,
    operator_transition,
)
from teleop.streams import (
    PT_HEARTBEAT,
    PT_MAP,
    PT_OBJECTS,
    PT_SECONDARY_COMMAND,
    PT_SYSTEM_STATUS,
    PT_TRAJECTORY_ACK,
    STREAM_COMMAND,
    STREAM_CONFIG,
    STREAM_HEARTBEAT,
    STREAM_STATE,
    STREAM_STATUS,
    STREAM_TRAJECTORY,
)
from teleop.transport.channel import Channel, ChannelTimeout, open_channel
from teleop.transport.clock_sync import ClockSyncError, estimate_clock_offset
from teleop.vehicle_agent import Mailbox, ReceivedHeartbeat

import json
import struct


class SessionError(RuntimeError):
    pass


class CommitError(SessionError):
    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


@dataclass
class Session:
    endpoints: EndpointConfig  # immutable per session
    concept: Concept
    clock_sync_offset_ms: float
    clock_sync_uncertainty_ms: float
    connected_at_ns: int
    input_device: str = "gateway"


_ACK_STRUCT = struct.Struct("<I")


class OperatorStation:
    """One operator workstation driving one vehicle."""

    def __init__(
        self,
        endpoints: EndpointConfig,
        platform: PlatformConfig,
        *,
        concept: Concept = Concept.DIRECT_CONTROL,
        logger=None,
        clock_ns=time.time_ns,
        command_rate_hz: float = 50.0,
        heartbeat_rate_hz: float = 10.0,
        heartbeat_timeout_ms: float = HEARTBEAT_TIMEOUT_MS,
    ):
        self.endpoints = endpoints
        self.platform = platform
        self.log = logger or NullLogger()
        self._clock_ns = clock_ns
        self.command_rate_hz = command_rate_hz
        self.heartbeat_rate_hz = heartbeat_rate_hz
        self.heartbeat_timeout_ms = heartbeat_timeout_ms

        self.state_machine = StateMachineHost(operator_transition, OperatorState.IDLE)
        self.monitor = StreamMonitor({STREAM_STATE: 50.0, STREAM_STATUS: 10.0, STREAM_HEARTBEAT: 10.0})
        self.pipeline = CommandPipeline(platform, dt_s=1.0 / command_rate_hz)
        self.draft = TrajectoryDraft(platform)

        self._lock = threading.RLock()
        self.session: Session | None = None
        self._concept = concept
        self._channels: dict[str, Channel] = {}
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._hb_sequence = 0
        self._trajectory_id = 0
        self.last_error: str | None = None

        self.input_box: Mailbox[InputFrame] = Mailbox()
        self.vehicle_state_box: Mailbox[VehicleState] = Mailbox()
        self.vehicle_status_box: Mailbox[SystemStatus] = Mailbox()
        self.vehicle_heartbeat_box: Mailbox[ReceivedHeartbeat] = Mailbox()
        self.objects = []
        self.map_polylines = []
        self._status_listeners = []

    # -- manager surface (interface to the UI and tests) -------------------

    @property
    def operator_state(self) -> OperatorState:
        return self.state_machine.state

    @property
    def concept(self) -> Concept:
        return self._concept

    def manager_state(self) -> dict:
        state = self.state_machine.state
        return {
            "operator_state": state.value,
            "concept": self._concept.value,
            "teleoperation_active": state is OperatorState.TELEOPERATION,
            "connected": self.session is not None,
            "last_error": self.last_error,
        }

    def add_status_listener(self, callback) -> None:
        """callback(SystemStatus) invoked from the session loop at 10 Hz."""
        self._status_listeners.append(callback)

    # -- session lifecycle ---------------------------------------------------

    def connect(self, *, sync_probes: int = 8, connect_timeout_s: float = 2.0) -> Session:
        with self._lock:
            if self.state_machine.state is not OperatorState.IDLE:
                raise SessionError("already connected")
            channels: dict[str, Channel] = {}
            try:
                for name in (STREAM_COMMAND, STREAM_STATE, STREAM_STATUS, STREAM_HEARTBEAT, STREAM_CONFIG):
                    channels[name] = open_channel(self.endpoints.channel_for(name, "operator"))
                # the TCP connect doubles as the reachability probe
                channels[STREAM_TRAJECTORY] = open_channel(
                    self.endpoints.channel_for(STREAM_TRAJECTORY, "operator"),
                    connect_retries=3,
                    retry_interval_s=connect_timeout_s / 8.0,
                    connect_timeout_s=connect_timeout_s / 4.0,
                )
                sync = estimate_clock_offset(
                    channels[STREAM_CONFIG], n_probes=sync_probes, timeout_ms=500.0, probe_interval_ms=5.0,
                    clock_ns=self._clock_ns,
                )
            except (OSError, ClockSyncError) as err:
                for channel in channels.values():
                    channel.close()
                self.last_error = f"vehicle unreachable: {err}"
                self.log.emit("manager", "connect_failed", {"error": str(err)}, severity="error")
                raise SessionError(self.last_error) from err

            for name in (STREAM_STATE, STREAM_STATUS, STREAM_HEARTBEAT):
                channels[name].set_clock_offset_ms(sync.offset_ms)
            self.monitor.set_clock_offset_ms(sync.offset_ms)

            self._channels = channels
            self._stop.clear()
            self.state_machine.apply(SmEvent.CONNECT)
            self.session = Session(
                endpoints=self.endpoints,
                concept=self._concept,
                clock_sync_offset_ms=sync.offset_ms,
                clock_sync_uncertainty_ms=sync.uncertainty_ms,
                connected_at_ns=self._clock_ns(),
            )
            self.last_error = None
            self._start_threads()
            self._send_heartbeat()
            self.log.emit(
                "manager", "connected",
                {"offset_ms": sync.offset_ms, "uncertainty_ms": sync.uncertainty_ms},
            )
            return self.session

    def disconnect(self) -> None:
        with self._lock:
            if self.state_machine.state is OperatorState.IDLE:
                return
            try:
                self._hb_sequence += 1
                hb = Heartbeat("IDLE", self._clock_ns(), self._hb_sequence)
                self._channels[STREAM_HEARTBEAT].send(hb.encode(), PT_HEARTBEAT)
            except OSError:
                pass
            self.state_machine.try_apply(SmEvent.DISCONNECT)
            self._teardown()
            self.log.emit("manager", "disconnected", {})

    def _session_lost(self, cause: str) -> None:
        with self._lock:
            if self.state_machine.state is OperatorState.IDLE:
                return
            self.state_machine.try_apply(SmEvent.HEARTBEAT_LOST)
            self.last_error = cause
            self._teardown_async()
            self.log.emit("manager", "session_lost", {"cause": cause}, severity="warn")

    def start_teleoperation(self, concept: Concept | None = None) -> None:
        with self._lock:
            if self.state_machine.state is not OperatorState.UPLINK:
                raise InvalidTransition(self.state_machine.state, SmEvent.START_TELEOPERATION)
            health = self._command_path_health()
            if health is not None:
                raise SessionError(f"command path unhealthy: {health}")
            if concept is not None:
                self._set_concept_locked(concept)
            self.state_machine.apply(SmEvent.START_TELEOPERATION)
            self.pipeline.reset()
            self._send_heartbeat()
            self.log.emit("manager", "teleoperation_started", {"concept": self._concept.value})

    def stop_teleoperation(self) -> None:
        with self._lock:
            self.state_machine.apply(SmEvent.STOP_TELEOPERATION)
            self.pipeline.reset()
            self._send_heartbeat()
            self.log.emit("manager", "teleoperation_stopped", {})

    def set_concept(self, concept: Concept) -> None:
        with self._lock:
            if self.state_machine.state is OperatorState.IDLE:
                raise SessionError("concept is switchable only while connected")
            self._set_concept_locked(concept)

    def _set_concept_locked(self, concept: Concept) -> None:
        if concept is self._concept:
            return
        self._concept = concept
        if self.session is not None:
            self.session.concept = concept
        # switching cancels in-flight drafts and zeroes command output
        self.draft.clear()
        self.pipeline.reset()
        self._send_heartbeat()
        self.log.emit("manager", "concept_switched", {"concept": concept.value})

    # -- direct control -----------------------------------------------------

    def submit_input_frame(self, frame: InputFrame) -> None:
        self.input_box.put(frame)

    def send_secondary(self, command: SecondaryControlCommand) -> None:
        with self._lock:
            if self.state_machine.state is not OperatorState.TELEOPERATION:
                raise SessionError("not teleoperating")
            self._channels[STREAM_COMMAND].send(encode_secondary_command(command), PT_SECONDARY_COMMAND)

    def set_vehicle_parameter(self, key: str, value: str, *, timeout_ms: float = 500.0):
        """Run-time config request bridged to the vehicle side."""
        from teleop.transport.config_service import config_request

        with self._lock:
            channel = self._channels.get(STREAM_CONFIG)
            if channel is None:
                raise SessionError("not connected")
        return config_request(channel, key, value, timeout_ms=timeout_ms)

    # -- trajectory guidance --------------------------------------------------

    def edit_trajectory(self, action: dict) -> dict:
        with self._lock:
            self.draft.apply(action)
            return self.draft.to_dict()

    def commit_trajectory(self, *, ack_timeout_ms: float = 1000.0) -> int:
        with self._lock:
            if self.state_machine.state is not OperatorState.TELEOPERATION:
                raise CommitError("commit requires active teleoperation")
            if self._concept is not Concept.TRAJECTORY_GUIDANCE:
                raise CommitError("commit requires the trajectory-guidance concept")
            if len(self.draft.points) < 2:
                raise CommitError("draft needs at least 2 waypoints")
            # every attempt burns an id: a retry must never collide with a
            # stale ack from an earlier send of the same draft
            self._trajectory_id += 1
            trajectory = self.draft.build(self._trajectory_id, self._clock_ns())
            from teleop.domain import validate_trajectory

            result = validate_trajectory(trajectory, self.platform)
            if not result.ok:
                raise CommitError("draft fails validation", violations=[str(v) for v in result.violations])
            channel = self._channels[STREAM_TRAJECTORY]
            channel.send(encode_trajectory(trajectory))
            deadline = time.monotonic() + ack_timeout_ms / 1000.0
            while True:
                remaining_ms = (deadline - time.monotonic()) * 1000.0
                if remaining_ms <= 0:
                    raise CommitError("ack timeout; draft stays uncommitted")
                try:
                    received = channel.recv(timeout_ms=remaining_ms)
                except ChannelTimeout:
                    raise CommitError("ack timeout; draft stays uncommitted") from None
                if received.envelope.payload_type != PT_TRAJECTORY_ACK:
                    continue
                (acked_id,) = _ACK_STRUCT.unpack(received.envelope.payload)
                if acked_id == trajectory.id:
                    break
            self.draft.mark_committed(trajectory.id)
            self.log.emit("manager", "trajectory_committed", {"id": trajectory.id, "points": len(trajectory.points)})
            return trajectory.id

    # -- status aggregation --------------------------------------------------

    def _command_path_health(self) -> str | None:
        """None when healthy, else a reason string."""
        received = self.vehicle_heartbeat_box.latest()
        if received is None:
            return "no vehicle heartbeat yet"
        verdict = evaluate_heartbeats(received.receive_stamp, self._clock_ns(), self.heartbeat_timeout_ms)
        if verdict is HeartbeatVerdict.LOST:
            return "vehicle heartbeat lost"
        try:
            health = self.monitor.compute_stream_health(STREAM_STATE, self._clock_ns())
        except KeyError:
            return "vehicle state stream unknown"
        if health.status.value == "Stale":
            return "vehicle state stream stale"
        return None

    def status_snapshot(self) -> SystemStatus:
        now = self._clock_ns()
        link = None
        try:
            link = self.monitor.compute_link_stats(STREAM_STATE, now_ns=now)
        except Exception:
            link = None
        streams = {}
        for stream in (STREAM_STATE, STREAM_STATUS, STREAM_HEARTBEAT):
            try:
                streams[stream] = self.monitor.compute_stream_health(stream, now)
            except KeyError:
                continue
        hb = self.vehicle_heartbeat_box.latest()
        vehicle_state_name = hb.heartbeat.sender_state if hb is not None else "IDLE"
        state = self.state_machine.state
        snapshot = fuse_status(
            StateSnapshot(
                operator_state=state.value,
                vehicle_state=vehicle_state_name,
                teleoperation_active=state is OperatorState.TELEOPERATION,
                concept=self._concept.value,
                stamp=now,
            ),
            link,
            streams,
            command_stream=STREAM_STATE,
        )
        return snapshot

    # -- loops ----------------------------------------------------------------

    def _start_threads(self) -> None:
        self._threads = [
            threading.Thread(target=self._command_loop, daemon=True, name="op-command"),
            threading.Thread(target=self._session_loop, daemon=True, name="op-session"),
            threading.Thread(target=self._recv_loop, args=(STREAM_STATE, self._on_state), daemon=True),
            threading.Thread(target=self._recv_loop, args=(STREAM_STATUS, self._on_status), daemon=True),
            threading.Thread(target=self._recv_loop, args=(STREAM_HEARTBEAT, self._on_heartbeat), daemon=True),
        ]
        for thread in self._threads:
            thread.start()

    def _teardown(self) -> None:
        self._stop.set()
        for channel in self._channels.values():
            channel.close()
        for thread in self._threads:
            if thread is not threading.current_thread():
                thread.join(timeout=2.0)
        self._threads = []
        self._channels = {}
        self.session = None
        self.vehicle_state_box.clear()
        self.vehicle_status_box.clear()
        self.vehicle_heartbeat_box.clear()

    def _teardown_async(self) -> None:
        threading.Thread(target=self._teardown, daemon=True).start()

    def _send_heartbeat(self) -> None:
        channel = self._channels.get(STREAM_HEARTBEAT)
        if channel is None:
            return
        self._hb_sequence += 1
        state = self.state_machine.state
        hb = Heartbeat(
            state.value,
            self._clock_ns(),
            self._hb_sequence,
            teleoperation_active=state is OperatorState.TELEOPERATION,
            concept=self._concept.value,
        )
        try:
            channel.send(hb.encode(), PT_HEARTBEAT)
        except OSError:
            pass

    def _command_loop(self) -> None:
        period = 1.0 / self.command_rate_hz
        next_send = time.monotonic()
        while not self._stop.is_set():
            next_send += period
            delay = next_send - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            if self.state_machine.state is not OperatorState.TELEOPERATION:
                continue
            if self._concept is not Concept.DIRECT_CONTROL:
                continue
            command = self.pipeline.next_command(self.input_box.latest(), self._clock_ns())
            channel = self._channels.get(STREAM_COMMAND)
            if channel is None:
                continue
            from teleop.domain import encode_primary_command

            try:
                channel.send(encode_primary_command(command))
            except OSError:
                continue
            self.log.emit(
                "station", "command_sent",
                {"steering": command.steering_angle, "velocity": command.desired_velocity, "seq": command.sequence},
                severity="debug",
            )

    def _session_loop(self) -> None:
        period = 1.0 / self.heartbeat_rate_hz
        next_beat = time.monotonic()
        while not self._stop.is_set():
            next_beat += period
            delay = next_beat - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            if self._stop.is_set():
                return
            with self._lock:
                if self.session is None:
                    continue
                self._send_heartbeat()
            received = self.vehicle_heartbeat_box.latest()
            if received is not None:
                verdict = evaluate_heartbeats(received.receive_stamp, self._clock_ns(), self.heartbeat_timeout_ms)
                if verdict is HeartbeatVerdict.LOST:
                    self._session_lost("vehicle heartbeat lost")
                    return
            snapshot = self.status_snapshot()
            for listener in list(self._status_listeners):
                try:
                    listener(snapshot)
                except Exception:
                    pass

    def _recv_loop(self, stream: str, handler) -> None:
        channel = self._channels.get(stream)
        if channel is None:
            return
        while not self._stop.is_set():
            try:
                received = channel.recv(timeout_ms=200.0)
            except ChannelTimeout:
                continue
            except OSError:
                return
            try:
                handler(received)
            except Exception as err:
                self.log.emit("station", "recv_handler_error", {"stream": stream, "error": str(err)}, severity="error")

    def _on_state(self, received) -> None:
        state = decode_vehicle_state(received.envelope.payload)
        self.vehicle_state_box.put(state)
        self.monitor.record_receipt(
            STREAM_STATE,
            received.envelope.send_stamp,
            received.receive_stamp,
            len(received.envelope.payload),
            received.envelope.sequence,
        )

    def _on_status(self, received) -> None:
        payload_type = received.envelope.payload_type
        if payload_type == PT_OBJECTS:
            data = json.loads(received.envelope.payload.decode("utf-8"))
            self.objects = [object_from_dict(o) for o in data]
            return
        if payload_type == PT_MAP:
            data = json.loads(received.envelope.payload.decode("utf-8"))
            self.map_polylines = [polyline_from_dict(p) for p in data]
            return
        if payload_type == PT_SYSTEM_STATUS:
            data = json.loads(received.envelope.payload.decode("utf-8"))
            self.vehicle_status_box.put(SystemStatus.from_dict(data))
            self.monitor.record_receipt(
                STREAM_STATUS,
                received.envelope.send_stamp,
                received.receive_stamp,
                len(received.envelope.payload),
                received.envelope.sequence,
            )

    def _on_heartbeat(self, received) -> None:
        hb = Heartbeat.decode(received.envelope.payload)
        self.vehicle_heartbeat_box.put(ReceivedHeartbeat(hb, received.receive_stamp))
        self.monitor.record_receipt(
            STREAM_HEARTBEAT,
            received.envelope.send_stamp,
            received.receive_stamp,
            len(received.envelope.payload),
            received.envelope.sequence,
        )

    def close(self) -> None:
        self.disconnect()
