from __future__ import annotations

import math

import pytest

from teleop.domain import (
    Concept,
    Gear,
    PlatformConfig,
    Pose2D,
    PrimaryControlCommand,
    SecondaryControlCommand,
    Trajectory,
    TrajectoryPoint,
)
from teleop.safety import DecisionKind, GateDecision, SafetyConfig
from teleop.sim_vehicle import SimConfig, SimVehicle
from teleop.state_machine import Heartbeat, VehicleSmState
from teleop.vehicle_agent import ActuationRequest, SimVehicleInterface, VehicleAgent

S = 1_000_000_000  # ns per s
TICK_S = 0.02


class VirtualClock:
    def __init__(self):
        self.now_ns = 0

    def __call__(self) -> int:
        return self.now_ns


def braking_platform():
    return PlatformConfig(name="sim_braking", velocity_tau_s=0.25)


def make_agent(platform=None, clock=None):
    platform = platform or braking_platform()
    clock = clock or VirtualClock()
    sim = SimVehicle(SimConfig.from_platform(platform, dt_s=0.01, initial_pose=Pose2D(0, 0, 0)))
    interface = SimVehicleInterface(sim, clock_ns=clock)
    agent = VehicleAgent(platform, interface, SafetyConfig())
    return agent, sim, clock


class LockstepDriver:
    """Feeds heartbeats/commands and advances agent + sim in virtual time."""

    def __init__(self, agent: VehicleAgent, sim: SimVehicle, clock: VirtualClock, concept="direct"):
        self.agent = agent
        self.sim = sim
        self.clock = clock
        self.concept = concept
        self.tick_index = 0
        self.hb_seq = 0
        self.cmd_seq = 0
        self.results = []
        self.setpoint_trace = []  # (t_s, velocity_setpoint seen by the platform)

    def send_heartbeat(self, teleop=True, state="TELEOPERATION"):
        now = self.clock.now_ns
        self.hb_seq += 1
        hb = Heartbeat(state, now, self.hb_seq, teleoperation_active=teleop, concept=self.concept)
        self.agent.ingest_heartbeat(hb, now, 64, self.hb_seq)

    def send_command(self, steering, velocity):
        now = self.clock.now_ns
        self.cmd_seq += 1
        cmd = PrimaryControlCommand(steering, velocity, self.cmd_seq, now)
        self.agent.ingest_command(cmd, now, now, 28, self.cmd_seq)

    def run(self, duration_s, command_fn=None, heartbeats=True, teleop=True):
        n = round(duration_s / TICK_S)
        for _ in range(n):
            t_s = self.tick_index * TICK_S
            if heartbeats and self.tick_index % 5 == 0:  # 10 Hz
                self.send_heartbeat(teleop=teleop, state="TELEOPERATION" if teleop else "UPLINK")
            if command_fn is not None:
                cmd = command_fn(t_s)
                if cmd is not None:
                    self.send_command(*cmd)
            result = self.agent.tick(self.clock.now_ns)
            self.results.append(result)
            self.sim.advance(TICK_S)
            self.setpoint_trace.append((t_s, self.sim.velocity_setpoint))
            self.tick_index += 1
            self.clock.now_ns = int(self.tick_index * TICK_S * S)
        return self.results[-1]


class TestApplyDirectControl:
    def test_forward_passes_setpoints_verbatim(self):
        agent, _, _ = make_agent()
        decision = GateDecision(DecisionKind.FORWARD, command=PrimaryControlCommand(0.1, 5.0, 1, 0))
        actuation = agent.apply_direct_control(decision, None)
        assert actuation == ActuationRequest(0.1, 5.0)

    def test_restrict_passes_modified_setpoints(self):
        agent, _, _ = make_agent()
        decision = GateDecision(
            DecisionKind.RESTRICT, command=PrimaryControlCommand(0.2, 3.0, 1, 0), reason="clamped"
        )
        actuation = agent.apply_direct_control(decision, None)
        assert actuation == ActuationRequest(0.2, 3.0)

    def test_safe_stop_engages_ramp(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock)
        driver.run(4.0, command_fn=lambda t: (0.0, 2.0))  # cruise at 2 m/s
        assert sim.state.velocity == pytest.approx(2.0, abs=0.05)
        driver.run(6.0, command_fn=None)  # commands halt; watchdog ramps to 0
        assert abs(sim.state.velocity) < 0.05


class TestAgentTick:
    def test_no_command_ever_in_teleoperation_safe_stops_after_timeout(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock)
        driver.run(1.0, command_fn=None)  # teleop active, nothing commanded
        reasons = [
            r.decision.reason for r in driver.results if r.decision and r.decision.kind is DecisionKind.SAFE_STOP
        ]
        assert any("stale command" in reason for reason in reasons)

    def test_sensing_stale_safe_stops(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock)
        driver.run(0.5, command_fn=lambda t: (0.0, 2.0))
        # freeze the adapter clock: sensing stamps go stale while time advances
        frozen = clock.now_ns
        agent.interface._clock_ns = lambda: frozen
        driver.run(1.0, command_fn=lambda t: (0.0, 2.0))
        reasons = [
            r.decision.reason for r in driver.results if r.decision and r.decision.kind is DecisionKind.SAFE_STOP
        ]
        assert any("sensing" in reason for reason in reasons)

    def test_concept_switch_discards_previous_setpoints(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock, concept="direct")
        driver.run(2.0, command_fn=lambda t: (0.0, 3.0))
        assert sim.velocity_setpoint > 0.0
        driver.concept = "trajectory"
        driver.run(0.2)
        assert agent._concept is Concept.TRAJECTORY_GUIDANCE
        assert sim.velocity_setpoint == 0.0  # previous setpoints discarded

    def test_heartbeat_loss_drives_vehicle_to_idle_and_stops(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock)
        driver.run(2.0, command_fn=lambda t: (0.0, 4.0))
        assert agent.state_machine.state is VehicleSmState.UPLINK
        driver.run(2.0, command_fn=lambda t: (0.0, 4.0), heartbeats=False)
        assert agent.state_machine.state is VehicleSmState.IDLE
        driver.run(4.0, command_fn=None, heartbeats=False)
        assert abs(sim.state.velocity) < 0.05

    def test_rearm_after_stop_start_cycle(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock)
        driver.run(1.0, command_fn=lambda t: (0.0, 3.0))
        driver.run(2.0, command_fn=None)  # trip the watchdog
        assert agent.gate.absorbed
        # stop, then start teleoperation again: latch clears
        driver.run(0.5, command_fn=None, teleop=False)
        driver.run(2.0, command_fn=lambda t: (0.0, 3.0))
        assert not agent.gate.absorbed
        assert sim.state.velocity > 1.0

    def test_secondary_gear_change_applied_at_standstill(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock)
        driver.run(0.2, command_fn=lambda t: (0.0, 0.0))
        agent.ingest_secondary(SecondaryControlCommand(gear=Gear.REVERSE, stamp=clock.now_ns))
        driver.run(0.1, command_fn=lambda t: (0.0, 0.0))
        assert sim.state.gear is Gear.REVERSE


class TestTrajectoryGuidanceMode:
    def _trajectory(self):
        points = []
        n = 30
        for i in range(n + 1):
            v = 2.0 if i < n else 0.0
            points.append(TrajectoryPoint(Pose2D(2.0 + i * 1.0, 0.0, 0.0), v))
        return Trajectory(tuple(points), 77)

    def test_follower_executes_committed_trajectory(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock, concept="trajectory")
        driver.run(0.2)
        assert agent.ingest_trajectory(self._trajectory()) == 77
        driver.run(25.0)
        assert sim.state.pose.x > 28.0  # reached the far end
        assert abs(sim.state.pose.y) < 0.1
        assert abs(sim.state.velocity) < 0.15  # terminal velocity honored

    def test_new_commit_replaces_active_trajectory(self):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock, concept="trajectory")
        driver.run(0.2)
        agent.ingest_trajectory(self._trajectory())
        driver.run(3.0)
        first_index = agent.follower.state.nearest_index
        assert first_index >= 0
        replacement = Trajectory(
            tuple(TrajectoryPoint(Pose2D(sim.state.pose.x + 1.0 + i, 3.0, 0.0), 1.0 if i < 10 else 0.0) for i in range(11)),
            78,
        )
        agent.ingest_trajectory(replacement)
        driver.run(0.1)
        assert agent.follower.state.trajectory.id == 78
        assert agent.follower.state.nearest_index == 0


class TestWatchdogBudget:
    @pytest.mark.parametrize("v0", [2.0, 5.0, 8.0])
    def test_halted_commands_stop_within_budget(self, v0):
        agent, sim, clock = make_agent()
        driver = LockstepDriver(agent, sim, clock)
        driver.run(6.0, command_fn=lambda t: (0.0, v0))  # settle at cruise
        assert sim.state.velocity == pytest.approx(v0, abs=0.05)

        t0_s = driver.tick_index * TICK_S  # command emission halts here
        driver.run(0.5 + v0 / 2.0 + 1.0 + 0.1, command_fn=None)

        # setpoint non-increasing from t0 + command_timeout (500 ms)
        cutoff = t0_s + 0.5
        tail = [sp for (t, sp) in driver.setpoint_trace if t >= cutoff]
        assert all(a >= b - 1e-9 for a, b in zip(tail, tail[1:]))

        # standstill within v0/2 + 1 s of the watchdog trip
        trip_tick = round((t0_s + 0.5) / TICK_S)
        budget_tick = trip_tick + round((v0 / 2.0 + 1.0) / TICK_S)
        velocities = [r.state.velocity for r in driver.results]
        assert abs(velocities[min(budget_tick, len(velocities) - 1)]) < 0.05
