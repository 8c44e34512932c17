"""Safety gate deciding per command: forward, restrict, or safe stop.

Every control command passes through here on the vehicle side. The gate is
a pure function of (command, status snapshot, config) plus a single
absorbing flag: once a safe stop triggers it sticks until the operator
re-arms by stopping and restarting teleoperation. Automation-bound
commands run through the same hook, currently as a pass-through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from teleop.domain import (
    Gear,
    PrimaryControlCommand,
    SecondaryControlCommand,
    VehicleState,
    gear_change_allowed,
)
from teleop.monitoring import SystemStatus
from teleop.state_machine import OperatorState


class DecisionKind(Enum):
    FORWARD = "Forward"
    RESTRICT = "Restrict"
    SAFE_STOP = "SafeStop"


# severity ordering used by the monotonicity property
SEVERITY = {DecisionKind.FORWARD: 0, DecisionKind.RESTRICT: 1, DecisionKind.SAFE_STOP: 2}


@dataclass(frozen=True)
class GateDecision:
    kind: DecisionKind
    command: PrimaryControlCommand | SecondaryControlCommand | None = None
    reason: str = ""

    @property
    def severity(self) -> int:
        return SEVERITY[self.kind]


@dataclass(frozen=True)
class SafetyConfig:
    command_timeout_ms: float = 500.0
    latency_restrict_threshold_ms: float = 50.0
    latency_stop_threshold_ms: float = 150.0
    restricted_vmax_mps: float = 3.0
    safe_stop_decel_mps2: float = 2.0

    def __post_init__(self) -> None:
        if self.latency_restrict_threshold_ms >= self.latency_stop_threshold_ms:
            raise ValueError("restrict threshold must be below stop threshold")
        if self.safe_stop_decel_mps2 <= 0.0:
            raise ValueError("safe_stop_decel_mps2 must be > 0")
        if self.command_timeout_ms <= 0.0:
            raise ValueError("command_timeout_ms must be > 0")
        if self.restricted_vmax_mps <= 0.0:
            raise ValueError("restricted_vmax_mps must be > 0")


def gate_primary(
    cmd: PrimaryControlCommand,
    status: SystemStatus,
    cfg: SafetyConfig,
    *,
    absorbed: bool = False,
) -> GateDecision:
    """Total decision function: every input yields exactly one decision.

    Command age is measured against the status stamp, the freshest
    knowledge the gate has.
    """
    if absorbed:
        return GateDecision(DecisionKind.SAFE_STOP, reason="safe stop latched, awaiting re-arm")
    if status.operator_state != OperatorState.TELEOPERATION.value or not status.teleoperation_active:
        return GateDecision(DecisionKind.SAFE_STOP, reason="not teleoperating")
    if not status.command_path_ok:
        return GateDecision(DecisionKind.SAFE_STOP, reason="command stream stale")
    age_ms = (status.stamp - cmd.stamp) / 1e6
    if age_ms > cfg.command_timeout_ms:
        return GateDecision(DecisionKind.SAFE_STOP, reason=f"stale command ({age_ms:.0f} ms)")
    p95 = status.link.latency_p95_ms if status.link is not None else 0.0
    if p95 > cfg.latency_stop_threshold_ms:
        return GateDecision(DecisionKind.SAFE_STOP, reason=f"latency p95 {p95:.1f} ms above stop threshold")
    if p95 > cfg.latency_restrict_threshold_ms:
        limited = math.copysign(min(abs(cmd.desired_velocity), cfg.restricted_vmax_mps), cmd.desired_velocity)
        if limited != cmd.desired_velocity:
            return GateDecision(
                DecisionKind.RESTRICT,
                command=replace(cmd, desired_velocity=limited),
                reason=f"latency p95 {p95:.1f} ms above restrict threshold, velocity clamped",
            )
        return GateDecision(
            DecisionKind.RESTRICT,
            command=cmd,
            reason=f"latency p95 {p95:.1f} ms above restrict threshold",
        )
    return GateDecision(DecisionKind.FORWARD, command=cmd)


_NOOP_SECONDARY = SecondaryControlCommand()


def gate_secondary(
    cmd: SecondaryControlCommand,
    status: SystemStatus,
    vehicle_state: VehicleState | None,
    cfg: SafetyConfig,
) -> GateDecision:
    """Secondary commands never force stops; at worst they become no-ops."""
    if status.operator_state != OperatorState.TELEOPERATION.value or not status.teleoperation_active:
        return GateDecision(DecisionKind.RESTRICT, command=_NOOP_SECONDARY, reason="not teleoperating")
    if not status.command_path_ok:
        return GateDecision(DecisionKind.RESTRICT, command=_NOOP_SECONDARY, reason="command path unhealthy")
    if cmd.gear is not None:
        velocity = vehicle_state.velocity if vehicle_state is not None else 0.0
        if not gear_change_allowed(cmd.gear, velocity):
            return GateDecision(
                DecisionKind.RESTRICT,
                command=replace(cmd, gear=None),
                reason=f"gear change to {cmd.gear.name} at {velocity:.1f} m/s",
            )
    return GateDecision(DecisionKind.FORWARD, command=cmd)


def gate_automation(payload: bytes, status: SystemStatus, cfg: SafetyConfig) -> GateDecision:
    """Hook for automation-bound commands; pass-through, currently unused."""
    return GateDecision(DecisionKind.FORWARD)


def safe_stop_profile(
    current_velocity: float,
    decel_mps2: float,
    dt_s: float,
    *,
    held_steering: float = 0.0,
    start_sequence: int = 0,
    start_stamp_ns: int = 0,
) -> list[PrimaryControlCommand]:
    """Deceleration ramp to standstill: v_k = max(0, |v0| - k*decel*dt).

    Steering is held, not zeroed; zeroing mid-curve is the more dangerous
    move. Reverse speeds ramp symmetrically toward 0. The final command is
    the absorbing zero setpoint.
    """
    if decel_mps2 <= 0.0 or dt_s <= 0.0:
        raise ValueError("decel and dt must be > 0")
    sign = 1.0 if current_velocity >= 0 else -1.0
    magnitude = abs(current_velocity)
    commands: list[PrimaryControlCommand] = []
    k = 0
    dt_ns = int(dt_s * 1e9)
    while True:
        v = max(0.0, magnitude - k * decel_mps2 * dt_s)
        commands.append(
            PrimaryControlCommand(
                steering_angle=held_steering,
                desired_velocity=sign * v,
                sequence=start_sequence + k,
                stamp=start_stamp_ns + k * dt_ns,
            )
        )
        if v == 0.0:
            return commands
        k += 1


class SafetyGate:
    """Gate plus the absorbing safe-stop flag.

    The flag is a single-writer cell owned by the vehicle agent loop;
    ``rearm`` is called when the operator cycles teleoperation off and on.
    """

    def __init__(self, cfg: SafetyConfig):
        self.cfg = cfg
        self.absorbed = False

    def decide_primary(self, cmd: PrimaryControlCommand, status: SystemStatus) -> GateDecision:
        decision = gate_primary(cmd, status, self.cfg, absorbed=self.absorbed)
        if decision.kind is DecisionKind.SAFE_STOP:
            self.absorbed = True
        return decision

    def decide_secondary(
        self, cmd: SecondaryControlCommand, status: SystemStatus, vehicle_state: VehicleState | None
    ) -> GateDecision:
        return gate_secondary(cmd, status, vehicle_state, self.cfg)

    def engage(self, reason: str) -> GateDecision:
        """Latch a safe stop directly (adapter failures, watchdog)."""
        self.absorbed = True
        return GateDecision(DecisionKind.SAFE_STOP, reason=reason)

    def rearm(self) -> None:
        self.absorbed = False
