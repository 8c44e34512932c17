"""Vehicle-side agent: generic platform interface, gate, and execution.

The agent runs one control tick at a fixed period: read sensing, evaluate
heartbeats and monitoring, gate the newest command (direct control) or run
the trajectory follower (trajectory guidance), write actuation, and
publish vehicle state plus system status. Transport receive paths deposit
newest-value mailboxes that the tick reads non-blockingly, so the same
core drives both the lockstep harness and the real-time service.
"""

from __future__ import annotations

import threading
import time
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from typing import Generic, TypeVar

from teleop.domain import (
    Concept,
    MapPolyline,
    PerceivedObject,
    PlatformConfig,
    PrimaryControlCommand,
    SecondaryControlCommand,
    VehicleState,
    clamp,
)
from teleop.follower import TrajectoryFollower
from teleop.monitoring import StateSnapshot, StreamMonitor, SystemStatus, fuse_status
from teleop.runlog import NullLogger
from teleop.safety import DecisionKind, GateDecision, SafetyConfig, SafetyGate, safe_stop_profile
from teleop.sim_vehicle import Scenario, SimVehicle
from teleop.state_machine import (
    HEARTBEAT_TIMEOUT_MS,
    Heartbeat,
    HeartbeatVerdict,
    SmEvent,
    StateMachineHost,
    VehicleSmState,
    evaluate_heartbeats,
    vehicle_transition,
)
from teleop.streams import COMMAND_RATE_HZ, HEARTBEAT_RATE_HZ, STREAM_COMMAND, STREAM_HEARTBEAT

T = TypeVar("T")

TICK_PERIOD_S = 0.02  # 50 Hz control period
SENSING_STALE_MS = 500.0


class Mailbox(Generic[T]):
    """Newest-value cell; receive threads put, the tick reads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value: T | None = None

    def put(self, value: T) -> None:
        with self._lock:
            self._value = value

    def latest(self) -> T | None:
        with self._lock:
            return self._value

    def take(self) -> T | None:
        with self._lock:
            value, self._value = self._value, None
            return value

    def clear(self) -> None:
        with self._lock:
            self._value = None


@dataclass(frozen=True)
class ActuationRequest:
    steering_setpoint: float  # rad
    velocity_setpoint: float  # m/s


class VehicleInterface(ABC):
    """Generic platform adapter: format conversion only, no control logic.

    Sensing feeds vehicle state out, actuation takes setpoints in, and the
    automation port exposes perceived objects and accepts trajectories for
    platforms whose own stack executes them.
    """

    @abstractmethod
    def read_state(self) -> VehicleState: ...

    @abstractmethod
    def apply_actuation(self, request: ActuationRequest) -> None: ...

    @abstractmethod
    def apply_secondary(self, command: SecondaryControlCommand) -> None: ...

    def perceived_objects(self) -> tuple[PerceivedObject, ...]:
        return ()

    def map_polylines(self) -> tuple[MapPolyline, ...]:
        return ()

    def forward_trajectory(self, trajectory) -> bool:
        """True if the platform's automation executes the trajectory itself."""
        return False

    def automation_state(self) -> str:
        return "none"


class SimVehicleInterface(VehicleInterface):
    """Adapter over the simulated platform; stepping stays with the caller."""

    def __init__(self, vehicle: SimVehicle, scenario: Scenario | None = None, clock_ns=time.time_ns):
        self.vehicle = vehicle
        self.scenario = scenario
        self._clock_ns = clock_ns
        self.gear_changes: list[SecondaryControlCommand] = []

    def read_state(self) -> VehicleState:
        s = self.vehicle.state
        return VehicleState(
            pose=s.pose,
            velocity=s.velocity,
            steering_angle=s.steering,
            gear=s.gear,
            stamp=self._clock_ns(),
        )

    def apply_actuation(self, request: ActuationRequest) -> None:
        self.vehicle.set_command(request.steering_setpoint, request.velocity_setpoint)

    def apply_secondary(self, command: SecondaryControlCommand) -> None:
        self.gear_changes.append(command)
        if command.gear is not None:
            self.vehicle.state = type(self.vehicle.state)(
                pose=self.vehicle.state.pose,
                velocity=self.vehicle.state.velocity,
                steering=self.vehicle.state.steering,
                gear=command.gear,
            )

    def perceived_objects(self) -> tuple[PerceivedObject, ...]:
        return self.scenario.objects if self.scenario else ()

    def map_polylines(self) -> tuple[MapPolyline, ...]:
        return self.scenario.polylines if self.scenario else ()


@dataclass(frozen=True)
class ReceivedCommand:
    command: PrimaryControlCommand
    receive_stamp: int


@dataclass(frozen=True)
class ReceivedHeartbeat:
    heartbeat: Heartbeat
    receive_stamp: int


@dataclass(frozen=True)
class TickResult:
    now_ns: int
    state: VehicleState | None
    status: SystemStatus
    actuation: ActuationRequest | None
    decision: GateDecision | None


class VehicleAgent:
    """Transport-independent agent core; one instance per vehicle process."""

    def __init__(
        self,
        platform: PlatformConfig,
        interface: VehicleInterface,
        safety_cfg: SafetyConfig | None = None,
        *,
        tick_period_s: float = TICK_PERIOD_S,
        heartbeat_timeout_ms: float = HEARTBEAT_TIMEOUT_MS,
        logger=None,
    ):
        self.platform = platform
        self.interface = interface
        self.safety_cfg = safety_cfg or SafetyConfig()
        self.tick_period_s = tick_period_s
        self.heartbeat_timeout_ms = heartbeat_timeout_ms
        self.log = logger or NullLogger()

        self.command_box: Mailbox[ReceivedCommand] = Mailbox()
        self.secondary_box: Mailbox[SecondaryControlCommand] = Mailbox()
        self.trajectory_box: Mailbox = Mailbox()
        self.heartbeat_box: Mailbox[ReceivedHeartbeat] = Mailbox()

        self.monitor = StreamMonitor(
            {STREAM_COMMAND: COMMAND_RATE_HZ, STREAM_HEARTBEAT: HEARTBEAT_RATE_HZ}
        )
        self.gate = SafetyGate(self.safety_cfg)
        self.state_machine = StateMachineHost(vehicle_transition, VehicleSmState.IDLE)
        self.follower = TrajectoryFollower(platform.wheelbase_m, platform.max_steering_rad)

        self._safe_stop_queue: deque[PrimaryControlCommand] = deque()
        self._last_state: VehicleState | None = None
        self._last_actuation = ActuationRequest(0.0, 0.0)
        self._last_forwarded_steering = 0.0
        self._teleop_active = False
        self._teleop_since_ns: int | None = None
        self._concept: Concept | None = None
        self._active_trajectory_id: int | None = None

    # -- ingestion (called from receive threads or the lockstep driver) ----

    def ingest_command(
        self, command: PrimaryControlCommand, send_stamp_ns: int, receive_stamp_ns: int,
        size_bytes: int = 0, sequence: int | None = None,
    ) -> None:
        self.command_box.put(ReceivedCommand(command, receive_stamp_ns))
        self.monitor.record_receipt(STREAM_COMMAND, send_stamp_ns, receive_stamp_ns, size_bytes, sequence)

    def ingest_secondary(self, command: SecondaryControlCommand) -> None:
        self.secondary_box.put(command)

    def ingest_trajectory(self, trajectory) -> int:
        """Deposit a newly committed trajectory; returns its id for the ack."""
        self.trajectory_box.put(trajectory)
        return trajectory.id

    def ingest_heartbeat(self, heartbeat: Heartbeat, receive_stamp_ns: int, size_bytes: int = 0,
                         sequence: int | None = None) -> None:
        self.heartbeat_box.put(ReceivedHeartbeat(heartbeat, receive_stamp_ns))
        self.monitor.record_receipt(
            STREAM_HEARTBEAT, heartbeat.stamp, receive_stamp_ns, size_bytes, sequence
        )
        if heartbeat.sender_state == "IDLE":
            self.state_machine.try_apply(SmEvent.DISCONNECT)
        elif self.state_machine.state is VehicleSmState.IDLE:
            self.state_machine.try_apply(SmEvent.CONNECT)

    def set_clock_offset_ms(self, offset_ms: float) -> None:
        self.monitor.set_clock_offset_ms(offset_ms)

    # -- per-tick logic ----------------------------------------------------

    def tick(self, now_ns: int) -> TickResult:
        """One control period; returns everything the caller should publish."""
        session = self._evaluate_session(now_ns)
        state = self._read_sensing(now_ns)
        status = self._fuse_status(session, now_ns)

        decision: GateDecision | None = None
        actuation: ActuationRequest | None = None

        secondary = self.secondary_box.take()
        if secondary is not None:
            sec_decision = self.gate.decide_secondary(secondary, status, state)
            self.log.emit("safety", "gate_secondary", {"kind": sec_decision.kind.value, "reason": sec_decision.reason})
            if sec_decision.kind is DecisionKind.FORWARD and sec_decision.command is not None:
                try:
                    self.interface.apply_secondary(sec_decision.command)
                except Exception as err:  # adapter I/O failure
                    decision = self.gate.engage(f"secondary actuation failure: {err}")

        if state is None:
            decision = self.gate.engage("no sensing data")
        elif (now_ns - state.stamp) / 1e6 > SENSING_STALE_MS:
            decision = self.gate.engage("sensing stream stale")

        if decision is None:
            if self._concept is Concept.TRAJECTORY_GUIDANCE:
                decision, actuation = self._tick_trajectory(state, status, now_ns)
            else:
                decision, actuation = self._tick_direct(state, status, now_ns)

        if decision is not None and decision.kind is DecisionKind.SAFE_STOP:
            actuation = self._safe_stop_actuation(state, decision.reason)

        if actuation is not None:
            actuation = ActuationRequest(
                clamp(actuation.steering_setpoint, -self.platform.max_steering_rad, self.platform.max_steering_rad),
                clamp(actuation.velocity_setpoint, self.platform.v_min_mps, self.platform.v_max_mps),
            )
            try:
                self.interface.apply_actuation(actuation)
                self._last_actuation = actuation
            except Exception as err:
                decision = self.gate.engage(f"actuation failure: {err}")
                actuation = self._last_actuation

        if decision is not None and decision.reason:
            self.log.emit("safety", "gate_primary", {"kind": decision.kind.value, "reason": decision.reason})
        if state is not None:
            self.log.emit(
                "vehicle_agent",
                "actuation",
                {
                    "steering_setpoint": (actuation or self._last_actuation).steering_setpoint,
                    "velocity_setpoint": (actuation or self._last_actuation).velocity_setpoint,
                    "steering_actual": state.steering_angle,
                    "velocity_actual": state.velocity,
                    "x": state.pose.x,
                    "y": state.pose.y,
                    "heading": state.pose.heading,
                },
                severity="debug",
            )
        return TickResult(now_ns, state, status, actuation, decision)

    # -- internals ---------------------------------------------------------

    def _evaluate_session(self, now_ns: int) -> ReceivedHeartbeat | None:
        received = self.heartbeat_box.latest()
        alive = False
        if received is not None:
            verdict = evaluate_heartbeats(received.receive_stamp, now_ns, self.heartbeat_timeout_ms)
            alive = verdict is HeartbeatVerdict.ALIVE
            if not alive and self.state_machine.state is VehicleSmState.UPLINK:
                self.state_machine.apply(SmEvent.HEARTBEAT_LOST)
                self.log.emit("state_machine", "heartbeat_lost", {"gap_source": "operator"}, severity="warn")

        teleop_active = alive and received is not None and received.heartbeat.teleoperation_active
        if teleop_active and not self._teleop_active:
            # operator re-armed: stop -> start cycles clear the latch and
            # discard any command left over from the previous phase
            self.gate.rearm()
            self._safe_stop_queue.clear()
            self.command_box.clear()
            self._teleop_since_ns = now_ns
        if not teleop_active:
            self._teleop_since_ns = None
        self._teleop_active = teleop_active

        concept: Concept | None = None
        if alive and received is not None and received.heartbeat.concept:
            try:
                concept = Concept(received.heartbeat.concept)
            except ValueError:
                concept = None
        if concept is not self._concept:
            # runtime switch: discard partial execution state and setpoints
            self.follower.clear()
            self._safe_stop_queue.clear()
            self._active_trajectory_id = None
            self._last_actuation = ActuationRequest(self._last_actuation.steering_setpoint, 0.0)
            self._concept = concept
        return received if alive else None

    def _read_sensing(self, now_ns: int) -> VehicleState | None:
        try:
            state = self.interface.read_state()
            self._last_state = state
            return state
        except Exception as err:
            self.log.emit("vehicle_agent", "sensing_failure", {"error": str(err)}, severity="error")
            return self._last_state

    def _fuse_status(self, session: ReceivedHeartbeat | None, now_ns: int) -> SystemStatus:
        link = None
        try:
            link = self.monitor.compute_link_stats(STREAM_COMMAND, now_ns=now_ns)
        except Exception:
            try:
                link = self.monitor.compute_link_stats(STREAM_HEARTBEAT, now_ns=now_ns)
            except Exception:
                link = None
        streams = {}
        for stream in (STREAM_COMMAND, STREAM_HEARTBEAT):
            try:
                streams[stream] = self.monitor.compute_stream_health(stream, now_ns)
            except KeyError:
                continue
        operator_state = session.heartbeat.sender_state if session is not None else "IDLE"
        snapshot = StateSnapshot(
            operator_state=operator_state,
            vehicle_state=self.state_machine.state.value,
            teleoperation_active=self._teleop_active,
            concept=self._concept.value if self._concept else None,
            stamp=now_ns,
        )
        return fuse_status(snapshot, link, streams)

    def _tick_direct(self, state: VehicleState | None, status: SystemStatus, now_ns: int):
        received = self.command_box.latest()
        if received is None:
            if (
                self._teleop_active
                and self._teleop_since_ns is not None
                and (now_ns - self._teleop_since_ns) / 1e6 > self.safety_cfg.command_timeout_ms
            ):
                return self.gate.engage("stale command (none received)"), None
            return None, None  # nothing to do yet; hold current actuation
        decision = self.gate.decide_primary(received.command, status)
        actuation = self.apply_direct_control(decision, state)
        return decision, actuation

    def _tick_trajectory(self, state: VehicleState | None, status: SystemStatus, now_ns: int):
        new_trajectory = self.trajectory_box.take()
        if new_trajectory is not None:
            handled_by_automation = False
            try:
                handled_by_automation = self.interface.forward_trajectory(new_trajectory)
            except Exception:
                handled_by_automation = False
            if not handled_by_automation:
                self.follower.set_trajectory(new_trajectory)
            self._active_trajectory_id = new_trajectory.id
            self.log.emit("vehicle_agent", "trajectory_accepted", {"id": new_trajectory.id})

        if not self._teleop_active:
            if self.follower.active:
                return self.gate.engage("teleoperation inactive"), None
            return None, None
        if self.gate.absorbed:
            return GateDecision(DecisionKind.SAFE_STOP, reason="safe stop latched, awaiting re-arm"), None
        if state is None or not self.follower.active:
            # no trajectory yet (or finished): hold standstill
            return None, ActuationRequest(self._last_actuation.steering_setpoint, 0.0)
        steering, velocity, _ = self.follower.update(state.pose, state.velocity)
        self._last_forwarded_steering = steering
        return None, ActuationRequest(steering, velocity)

    def apply_direct_control(self, decision: GateDecision, state: VehicleState | None) -> ActuationRequest | None:
        """Map a gate decision onto actuation setpoints."""
        if decision.kind is DecisionKind.SAFE_STOP:
            return None  # handled by the safe-stop queue in tick()
        command = decision.command
        if command is None:
            return None
        self._last_forwarded_steering = command.steering_angle
        return ActuationRequest(command.steering_angle, command.desired_velocity)

    def _safe_stop_actuation(self, state: VehicleState | None, reason: str) -> ActuationRequest:
        if not self._safe_stop_queue:
            v0 = state.velocity if state is not None else self._last_actuation.velocity_setpoint
            profile = safe_stop_profile(
                v0,
                self.safety_cfg.safe_stop_decel_mps2,
                self.tick_period_s,
                held_steering=self._last_forwarded_steering,
            )
            self._safe_stop_queue = deque(profile)
            self.log.emit(
                "safety", "safe_stop_engaged", {"reason": reason, "v0": v0, "steps": len(profile)}, severity="warn"
            )
        command = self._safe_stop_queue[0]
        if len(self._safe_stop_queue) > 1:
            self._safe_stop_queue.popleft()  # terminal zero setpoint stays and holds
        return ActuationRequest(command.steering_angle, command.desired_velocity)
