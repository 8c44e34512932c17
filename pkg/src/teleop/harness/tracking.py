"""Closed-loop tracking scenarios in lockstep sim time.

Runs the full command path (input mapping or committed trajectory, safety
gate, follower, simulated platform) on a virtual clock, logs every tick,
and exports desired-vs-actual series plus error metrics. Runs are
bit-deterministic: no wall clock, no threads, seeded everything.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path

from teleop.domain import (
    Concept,
    PlatformConfig,
    Pose2D,
    Trajectory,
    TrajectoryPoint,
    validate_trajectory,
)
from teleop.follower import project_onto_path
from teleop.operator_station.input_mapping import CommandPipeline, InputFrame
from teleop.runlog import write_csv
from teleop.safety import SafetyConfig
from teleop.sim_vehicle import Scenario, SimConfig, SimVehicle, load_scenario
from teleop.state_machine import Heartbeat
from teleop.vehicle_agent import SimVehicleInterface, VehicleAgent

S = 1_000_000_000
TICK_S = 0.02


@dataclass(frozen=True)
class TrackingReport:
    concept: str
    scenario: str
    duration_s: float
    goal_reached: bool
    velocity_rms: float
    velocity_max: float
    steering_rms: float
    steering_max: float
    cross_track_rms: float | None
    cross_track_max: float | None
    csv_paths: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "concept": self.concept,
            "scenario": self.scenario,
            "duration_s": self.duration_s,
            "goal_reached": self.goal_reached,
            "velocity_rms_mps": self.velocity_rms,
            "velocity_max_mps": self.velocity_max,
            "steering_rms_rad": self.steering_rms,
            "steering_max_rad": self.steering_max,
            "cross_track_rms_m": self.cross_track_rms,
            "cross_track_max_m": self.cross_track_max,
            "csv_paths": list(self.csv_paths),
        }


def load_direct_script(path: str | Path) -> list[dict]:
    """NDJSON input-frame script: one {t_ms, steering_axis, ...} per line."""
    frames = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            frames.append(json.loads(line))
        except json.JSONDecodeError as err:
            raise ValueError(f"{path}:{lineno}: {err}") from err
    frames.sort(key=lambda f: f.get("t_ms", 0))
    return frames


def load_trajectory_script(path: str | Path, trajectory_id: int = 1) -> Trajectory:
    """CSV trajectory script with an x_m,y_m,v_mps header row."""
    points: list[TrajectoryPoint] = []
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    pending: list[tuple[float, float, float]] = []
    for lineno, raw in enumerate(rows, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("x"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected x,y,v")
        pending.append((float(parts[0]), float(parts[1]), float(parts[2])))
    for i, (x, y, v) in enumerate(pending):
        if i + 1 < len(pending):
            nx, ny, _ = pending[i + 1]
            heading = math.atan2(ny - y, nx - x)
        elif points:
            heading = points[-1].pose.heading
        else:
            heading = 0.0
        points.append(TrajectoryPoint(Pose2D(x, y, heading), v))
    return Trajectory(tuple(points), trajectory_id)


class _ScriptedFrames:
    """Replays recorded input frames against the virtual clock."""

    def __init__(self, rows: list[dict]):
        self._rows = rows
        self._index = 0
        self._current: dict | None = None

    def at(self, t_ms: float) -> InputFrame | None:
        while self._index < len(self._rows) and self._rows[self._index].get("t_ms", 0) <= t_ms:
            self._current = self._rows[self._index]
            self._index += 1
        if self._current is None:
            return None
        row = self._current
        return InputFrame(
            steering_axis=float(row.get("steering_axis", 0.0)),
            throttle_axis=float(row.get("throttle_axis", 0.0)),
            brake_axis=float(row.get("brake_axis", 0.0)),
            stamp=int(t_ms * 1e6),  # scripted frames are always fresh
            enable=True,
        )


def _rms(values: list[float]) -> float:
    if not values:
        return 0.0
    return math.sqrt(statistics.mean(v * v for v in values))


def cross_track_error(pose: Pose2D, trajectory: Trajectory, arcs: list[float]) -> float:
    """Perpendicular distance to the commanded path.

    Distance past either endpoint along the path direction is overrun, not
    cross-track, so the error is measured against the projected segment's
    line rather than the clamped endpoint.
    """
    index, _, _ = project_onto_path(pose, trajectory, arcs, 0)
    a = trajectory.points[index].pose
    b = trajectory.points[index + 1].pose
    seg_dx, seg_dy = b.x - a.x, b.y - a.y
    seg_len = math.hypot(seg_dx, seg_dy)
    if seg_len <= 0.0:
        return math.hypot(pose.x - a.x, pose.y - a.y)
    return abs(seg_dx * (pose.y - a.y) - seg_dy * (pose.x - a.x)) / seg_len


def run_tracking_scenario(
    concept: Concept | str,
    scenario: Scenario | str,
    script: str | Path,
    *,
    out_dir: str | Path,
    platform: PlatformConfig | None = None,
    safety_cfg: SafetyConfig | None = None,
    duration_limit_s: float = 120.0,
    settle_s: float = 2.0,
    label: str | None = None,
) -> TrackingReport:
    """Lockstep closed-loop run; emits desired-vs-actual CSVs and metrics.

    An unreached goal region flags the report but still emits metrics.
    """
    if isinstance(concept, str):
        concept = Concept(concept)
    if isinstance(scenario, str):
        scenario = load_scenario(scenario)
    platform = platform or PlatformConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    clock_holder = {"now": 0}
    clock = lambda: clock_holder["now"]  # noqa: E731 - tiny closure, local only
    sim = SimVehicle(SimConfig.from_platform(platform, dt_s=0.01, initial_pose=scenario.start_pose))
    interface = SimVehicleInterface(sim, scenario, clock_ns=clock)
    agent = VehicleAgent(platform, interface, safety_cfg or SafetyConfig(), tick_period_s=TICK_S)
    pipeline = CommandPipeline(platform, dt_s=TICK_S)

    frames: _ScriptedFrames | None = None
    committed: Trajectory | None = None
    committed_arcs: list[float] | None = None
    if concept is Concept.DIRECT_CONTROL:
        frames = _ScriptedFrames(load_direct_script(script))
    else:
        committed = load_trajectory_script(script)
        result = validate_trajectory(committed, platform)
        if not result.ok:
            raise ValueError(f"scripted trajectory invalid: {[str(v) for v in result.violations]}")
        committed_arcs = committed.arc_lengths()

    velocity_rows: list[list] = [["t_ms", "desired_mps", "actual_mps"]]
    steering_rows: list[list] = [["t_ms", "desired_rad", "actual_rad"]]
    path_rows: list[list] = [["t_ms", "x_m", "y_m", "cross_track_m"]]
    velocity_errors: list[float] = []
    steering_errors: list[float] = []
    cross_tracks: list[float] = []

    hb_seq = 0
    cmd_injected = False
    goal_reached = False
    goal_tick: int | None = None
    ticks = round(duration_limit_s / TICK_S)
    tick = 0
    for tick in range(ticks):
        now = clock_holder["now"]
        t_ms = tick * TICK_S * 1000.0
        if tick % 5 == 0:  # 10 Hz heartbeats
            hb_seq += 1
            agent.ingest_heartbeat(
                Heartbeat("TELEOPERATION", now, hb_seq, True, concept.value), now, 64, hb_seq
            )
        desired_steering = None
        desired_velocity = None
        if concept is Concept.DIRECT_CONTROL:
            command = pipeline.next_command(frames.at(t_ms), now)
            agent.ingest_command(command, now, now, 28, command.sequence)
            desired_steering = command.steering_angle
            desired_velocity = command.desired_velocity
        elif not cmd_injected and tick >= 5:
            agent.ingest_trajectory(committed)
            cmd_injected = True

        result = agent.tick(now)
        sim.advance(TICK_S)

        state = result.state
        if state is not None:
            if concept is Concept.TRAJECTORY_GUIDANCE and result.actuation is not None:
                desired_steering = result.actuation.steering_setpoint
                desired_velocity = result.actuation.velocity_setpoint
            if desired_velocity is not None:
                velocity_rows.append([round(t_ms, 3), desired_velocity, state.velocity])
                velocity_errors.append(desired_velocity - state.velocity)
            if desired_steering is not None:
                steering_rows.append([round(t_ms, 3), desired_steering, state.steering_angle])
                steering_errors.append(desired_steering - state.steering_angle)
            if committed is not None and cmd_injected:
                cross = cross_track_error(state.pose, committed, committed_arcs)
                path_rows.append([round(t_ms, 3), state.pose.x, state.pose.y, cross])
                cross_tracks.append(cross)
            if not goal_reached and scenario.goal_reached(state.pose):
                goal_reached = True
                goal_tick = tick
        if goal_reached and tick - goal_tick >= settle_s / TICK_S:
            break
        clock_holder["now"] = int((tick + 1) * TICK_S * S)

    prefix = label or f"{concept.value}_{scenario.name}"
    csv_paths = [
        str(write_csv(velocity_rows, out_dir / f"{prefix}_velocity.csv")),
        str(write_csv(steering_rows, out_dir / f"{prefix}_steering.csv")),
    ]
    if committed is not None:
        csv_paths.append(str(write_csv(path_rows, out_dir / f"{prefix}_path.csv")))

    return TrackingReport(
        concept=concept.value,
        scenario=scenario.name,
        duration_s=(tick + 1) * TICK_S,
        goal_reached=goal_reached,
        velocity_rms=_rms(velocity_errors),
        velocity_max=max((abs(v) for v in velocity_errors), default=0.0),
        steering_rms=_rms(steering_errors),
        steering_max=max((abs(v) for v in steering_errors), default=0.0),
        cross_track_rms=_rms(cross_tracks) if cross_tracks else None,
        cross_track_max=max(cross_tracks, default=None) if cross_tracks else None,
        csv_paths=tuple(csv_paths),
    )
