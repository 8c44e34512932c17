"""Simulated vehicle platform: kinematic bicycle with actuator lags.

Stands behind the generic vehicle interface exactly like a real platform
adapter would. First-order lags on steering and velocity reproduce the
sluggish setpoint response seen on full-size vehicles; Euler integration
at a fixed small step keeps the model checkable against analytic
solutions. A static scenario world (polyline map plus perceived objects)
provides the construction-site bypass setting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from teleop.domain import (
    Gear,
    MapPolyline,
    ObjectClass,
    PerceivedObject,
    PlatformConfig,
    PolylineKind,
    Pose2D,
    clamp,
    normalize_heading,
)


@dataclass(frozen=True)
class SimConfig:
    wheelbase_m: float = 2.9
    max_steering_rad: float = 0.61
    steering_tau_s: float = 0.2
    velocity_tau_s: float = 1.5
    max_accel_mps2: float = 3.5
    dt_s: float = 0.01
    initial_pose: Pose2D = Pose2D(0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not 0.0 < self.dt_s <= 0.05:
            raise ValueError("dt_s must be in (0, 0.05]")
        if self.steering_tau_s <= 0.0 or self.velocity_tau_s <= 0.0:
            raise ValueError("time constants must be > 0")
        if self.wheelbase_m <= 0.0:
            raise ValueError("wheelbase_m must be > 0")

    @classmethod
    def from_platform(cls, platform: PlatformConfig, dt_s: float = 0.01, initial_pose: Pose2D = Pose2D(0, 0, 0)) -> "SimConfig":
        return cls(
            wheelbase_m=platform.wheelbase_m,
            max_steering_rad=platform.max_steering_rad,
            steering_tau_s=platform.steering_tau_s,
            velocity_tau_s=platform.velocity_tau_s,
            max_accel_mps2=platform.max_accel_mps2,
            dt_s=dt_s,
            initial_pose=initial_pose,
        )


@dataclass(frozen=True)
class SimState:
    pose: Pose2D
    velocity: float  # m/s
    steering: float  # rad, actual front wheel angle
    gear: Gear = Gear.DRIVE

    @classmethod
    def at(cls, pose: Pose2D) -> "SimState":
        return cls(pose=pose, velocity=0.0, steering=0.0)


def step(state: SimState, steering_setpoint: float, velocity_setpoint: float, cfg: SimConfig) -> SimState:
    """One Euler step: pose from the old actuator values, then the lags.

        x' = x + v cos(th) dt          th' = th + v tan(delta)/L dt
        delta' = delta + (delta_set - delta) dt/tau_d
        v' = v + clamp((v_set - v)/tau_v, +-a_max) dt
    """
    dt = cfg.dt_s
    steering_setpoint = clamp(steering_setpoint, -cfg.max_steering_rad, cfg.max_steering_rad)
    x = state.pose.x + state.velocity * math.cos(state.pose.heading) * dt
    y = state.pose.y + state.velocity * math.sin(state.pose.heading) * dt
    heading = normalize_heading(
        state.pose.heading + state.velocity * math.tan(state.steering) / cfg.wheelbase_m * dt
    )
    steering = state.steering + (steering_setpoint - state.steering) * dt / cfg.steering_tau_s
    steering = clamp(steering, -cfg.max_steering_rad, cfg.max_steering_rad)
    rate = clamp((velocity_setpoint - state.velocity) / cfg.velocity_tau_s, -cfg.max_accel_mps2, cfg.max_accel_mps2)
    velocity = state.velocity + rate * dt
    return SimState(pose=Pose2D(x, y, heading), velocity=velocity, steering=steering, gear=state.gear)


class SimVehicle:
    """Stepped simulation owned by whichever clock drives it."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.state = SimState.at(cfg.initial_pose)
        self.steering_setpoint = 0.0
        self.velocity_setpoint = 0.0
        self.time_s = 0.0

    def set_command(self, steering_setpoint: float, velocity_setpoint: float) -> None:
        self.steering_setpoint = clamp(steering_setpoint, -self.cfg.max_steering_rad, self.cfg.max_steering_rad)
        self.velocity_setpoint = velocity_setpoint

    def advance(self, duration_s: float) -> SimState:
        steps = max(1, round(duration_s / self.cfg.dt_s))
        for _ in range(steps):
            self.state = step(self.state, self.steering_setpoint, self.velocity_setpoint, self.cfg)
            self.time_s += self.cfg.dt_s
        return self.state


@dataclass(frozen=True)
class Scenario:
    name: str
    polylines: tuple[MapPolyline, ...]
    objects: tuple[PerceivedObject, ...]
    start_pose: Pose2D
    goal_center: tuple[float, float]
    goal_radius_m: float

    def goal_reached(self, pose: Pose2D) -> bool:
        return math.hypot(pose.x - self.goal_center[0], pose.y - self.goal_center[1]) <= self.goal_radius_m


class ScenarioError(ValueError):
    pass


def _object_contains(obj: PerceivedObject, x: float, y: float) -> bool:
    dx = x - obj.center.x
    dy = y - obj.center.y
    cos_h = math.cos(-obj.center.heading)
    sin_h = math.sin(-obj.center.heading)
    local_x = dx * cos_h - dy * sin_h
    local_y = dx * sin_h + dy * cos_h
    return abs(local_x) <= obj.length / 2 and abs(local_y) <= obj.width / 2


def parse_scenario(text: str, name: str = "inline") -> Scenario:
    """Parse the line-oriented scenario format; errors carry line numbers.

    Lines: ``start x y heading``, ``goal x y radius``,
    ``polyline kind id x,y x,y ...``, ``object class id cx cy heading length width``.
    """
    start: Pose2D | None = None
    goal: tuple[float, float, float] | None = None
    polylines: list[MapPolyline] = []
    objects: list[PerceivedObject] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            kind = fields[0]
            if kind == "start":
                start = Pose2D(float(fields[1]), float(fields[2]), float(fields[3]))
            elif kind == "goal":
                goal = (float(fields[1]), float(fields[2]), float(fields[3]))
            elif kind == "polyline":
                vertices = tuple(tuple(float(c) for c in pair.split(",")) for pair in fields[3:])
                polylines.append(MapPolyline(fields[2], PolylineKind[fields[1].upper()], vertices))
            elif kind == "object":
                objects.append(
                    PerceivedObject(
                        id=int(fields[2]),
                        object_class=ObjectClass[fields[1].upper()],
                        center=Pose2D(float(fields[3]), float(fields[4]), float(fields[5])),
                        length=float(fields[6]),
                        width=float(fields[7]),
                    )
                )
            else:
                raise ScenarioError(f"{name}:{lineno}: unknown directive {kind!r}")
        except ScenarioError:
            raise
        except (ValueError, KeyError, IndexError) as err:
            raise ScenarioError(f"{name}:{lineno}: {err}") from err
    if start is None:
        raise ScenarioError(f"{name}: missing 'start' line")
    if goal is None:
        raise ScenarioError(f"{name}: missing 'goal' line")
    for obj in objects:
        if _object_contains(obj, start.x, start.y):
            raise ScenarioError(f"{name}: object {obj.id} overlaps the start pose")
    return Scenario(
        name=name,
        polylines=tuple(polylines),
        objects=tuple(objects),
        start_pose=start,
        goal_center=(goal[0], goal[1]),
        goal_radius_m=goal[2],
    )


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a scenario by built-in name or from a file path."""
    path = Path(name_or_path)
    if path.suffix == ".scn" and path.exists():
        return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)
    builtin = resources.files("teleop").joinpath(f"data/scenarios/{name_or_path}.scn")
    if builtin.is_file():
        return parse_scenario(builtin.read_text(encoding="utf-8"), name=str(name_or_path))
    if path.exists():
        return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)
    raise FileNotFoundError(f"scenario {name_or_path!r} not found (no built-in and no such file)")
