"""Shared domain types, units, and validation used by every other module.

Conventions: ENU-style planar frame (x east, y north), headings in radians
CCW from +x normalized into (-pi, pi], SI units throughout, steering
positive to the left. Timestamps are integer nanoseconds.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

TWO_PI = 2.0 * math.pi

# Gear changes into Park/Reverse only allowed below this speed.
STANDSTILL_MPS = 0.1

# Consecutive trajectory point spacing bounds keeping the follower's
# interpolation well-conditioned.
MIN_POINT_SPACING_M = 0.1
MAX_POINT_SPACING_M = 5.0


class Concept(Enum):
    """The two remote-driving modes, switchable at run time."""

    DIRECT_CONTROL = "direct"
    TRAJECTORY_GUIDANCE = "trajectory"


class Gear(Enum):
    PARK = 0
    REVERSE = 1
    NEUTRAL = 2
    DRIVE = 3


class Indicator(Enum):
    OFF = 0
    LEFT = 1
    RIGHT = 2
    HAZARD = 3


class ObjectClass(Enum):
    PASSENGER_VEHICLE = 0
    TRUCK = 1
    PEDESTRIAN = 2
    CYCLIST = 3
    UNKNOWN = 4


class PolylineKind(Enum):
    LANE_BOUNDARY = 0
    DRIVABLE_EDGE = 1


def normalize_heading(theta: float) -> float:
    """Wrap an angle to (-pi, pi].

    The result is congruent to ``theta`` modulo 2*pi. Raises ValueError on
    non-finite input.
    """
    if not math.isfinite(theta):
        raise ValueError(f"heading must be finite, got {theta!r}")
    wrapped = theta % TWO_PI  # [0, 2*pi) for positive modulus
    if wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


def clamp(value: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, value))


@dataclass(frozen=True)
class Pose2D:
    x: float  # m, east
    y: float  # m, north
    heading: float  # rad, CCW from +x, in (-pi, pi]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("pose coordinates must be finite")
        object.__setattr__(self, "heading", normalize_heading(self.heading))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class PrimaryControlCommand:
    steering_angle: float  # rad, positive = left
    desired_velocity: float  # m/s
    sequence: int  # strictly increasing per session
    stamp: int  # ns since epoch

    def __post_init__(self) -> None:
        if not math.isfinite(self.steering_angle):
            raise ValueError("steering_angle must be finite")
        if not math.isfinite(self.desired_velocity):
            raise ValueError("desired_velocity must be finite")
        if self.sequence < 0:
            raise ValueError("sequence must be non-negative")


@dataclass(frozen=True)
class SecondaryControlCommand:
    gear: Gear | None = None  # None = no gear change requested
    indicator: Indicator | None = None
    horn: bool = False
    stamp: int = 0


@dataclass(frozen=True)
class TrajectoryPoint:
    pose: Pose2D
    velocity: float  # m/s, >= 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.velocity) or self.velocity < 0.0:
            raise ValueError(f"point velocity must be >= 0, got {self.velocity}")


@dataclass(frozen=True)
class Trajectory:
    points: tuple[TrajectoryPoint, ...]
    id: int  # session-unique
    stamp: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 2:
            raise ValueError("trajectory needs at least 2 points")

    def arc_lengths(self) -> list[float]:
        """Cumulative arc length at each point, starting at 0."""
        acc = [0.0]
        for prev, cur in zip(self.points, self.points[1:]):
            acc.append(acc[-1] + prev.pose.distance_to(cur.pose))
        return acc


@dataclass(frozen=True)
class VehicleState:
    pose: Pose2D
    velocity: float  # m/s, signed (negative = reversing)
    steering_angle: float  # rad
    gear: Gear
    stamp: int  # ns


@dataclass(frozen=True)
class PerceivedObject:
    id: int
    object_class: ObjectClass
    center: Pose2D
    length: float  # m
    width: float  # m

    def __post_init__(self) -> None:
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError("object extents must be positive")


@dataclass(frozen=True)
class MapPolyline:
    id: str
    kind: PolylineKind
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))
        if len(self.vertices) < 2:
            raise ValueError("polyline needs at least 2 vertices")


@dataclass(frozen=True)
class PlatformConfig:
    """Per-platform limits and actuator characteristics.

    Loaded from one human-readable ``key = value`` file per platform kept
    in a central config directory.
    """

    name: str = "sim_default"
    wheelbase_m: float = 2.9
    max_steering_rad: float = 0.61
    v_min_mps: float = -2.0
    v_max_mps: float = 8.333333
    max_accel_mps2: float = 3.5
    max_decel_mps2: float = 2.0
    steering_tau_s: float = 0.2
    velocity_tau_s: float = 1.5

    def __post_init__(self) -> None:
        if self.wheelbase_m <= 0.0:
            raise ValueError("wheelbase_m must be > 0")
        if not 0.0 < self.max_steering_rad < math.pi / 2:
            raise ValueError("max_steering_rad must be in (0, pi/2)")
        if self.v_min_mps > 0.0 or self.v_max_mps <= 0.0:
            raise ValueError("velocity limits must bracket 0")
        if self.max_accel_mps2 <= 0.0 or self.max_decel_mps2 <= 0.0:
            raise ValueError("acceleration limits must be > 0")
        if self.steering_tau_s <= 0.0 or self.velocity_tau_s <= 0.0:
            raise ValueError("actuator time constants must be > 0")

    @property
    def max_curvature(self) -> float:
        """Tightest curvature the platform can hold, tan(max_steer)/L."""
        return math.tan(self.max_steering_rad) / self.wheelbase_m

    @classmethod
    def load(cls, path: str | Path) -> "PlatformConfig":
        values = _read_keyvalue_file(Path(path))
        kwargs: dict = {"name": values.pop("name", Path(path).stem)}
        for f in (
            "wheelbase_m",
            "max_steering_rad",
            "v_min_mps",
            "v_max_mps",
            "max_accel_mps2",
            "max_decel_mps2",
            "steering_tau_s",
            "velocity_tau_s",
        ):
            if f in values:
                kwargs[f] = float(values.pop(f))
        if values:
            raise ValueError(f"unknown platform config keys: {sorted(values)}")
        return cls(**kwargs)

    def dump(self, path: str | Path) -> None:
        lines = [f"name = {self.name}"]
        for f in (
            "wheelbase_m",
            "max_steering_rad",
            "v_min_mps",
            "v_max_mps",
            "max_accel_mps2",
            "max_decel_mps2",
            "steering_tau_s",
            "velocity_tau_s",
        ):
            lines.append(f"{f} = {getattr(self, f)!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_keyvalue_file(path: Path) -> dict[str, str]:
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str
    point_index: int | None = None

    def __str__(self) -> str:  # pragma: no cover - repr convenience
        at = f" @p{self.point_index}" if self.point_index is not None else ""
        return f"{self.code}{at}: {self.detail}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def menger_curvature(a: tuple[float, float], b: tuple[float, float], c: tuple[float, float]) -> float:
    """Unsigned curvature of the circle through three points (1/m).

    Collinear points give 0. Degenerate (coincident) points give inf so the
    spacing check reports them, not this one.
    """
    ab = math.dist(a, b)
    bc = math.dist(b, c)
    ca = math.dist(c, a)
    if min(ab, bc, ca) <= 1e-12:
        return math.inf
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return 2.0 * abs(cross) / (ab * bc * ca)


def validate_trajectory(trajectory: Trajectory, platform: PlatformConfig) -> ValidationResult:
    """Check spacing, curvature, and terminal-velocity feasibility.

    Violations are returned as data; the trajectory is never mutated.
    """
    violations: list[Violation] = []
    pts = trajectory.points

    for i, (prev, cur) in enumerate(zip(pts, pts[1:]), start=1):
        spacing = prev.pose.distance_to(cur.pose)
        if spacing < MIN_POINT_SPACING_M:
            violations.append(
                Violation("spacing_too_small", f"{spacing:.3f} m < {MIN_POINT_SPACING_M} m", i)
            )
        elif spacing > MAX_POINT_SPACING_M:
            violations.append(
                Violation("spacing_too_large", f"{spacing:.3f} m > {MAX_POINT_SPACING_M} m", i)
            )

    kappa_max = platform.max_curvature
    for i in range(1, len(pts) - 1):
        a = (pts[i - 1].pose.x, pts[i - 1].pose.y)
        b = (pts[i].pose.x, pts[i].pose.y)
        c = (pts[i + 1].pose.x, pts[i + 1].pose.y)
        kappa = menger_curvature(a, b, c)
        if kappa > kappa_max + 1e-9:
            violations.append(
                Violation(
                    "curvature_exceeded",
                    f"{kappa:.4f} 1/m > tan({platform.max_steering_rad:.3f})/{platform.wheelbase_m:.3f}"
                    f" = {kappa_max:.4f} 1/m",
                    i,
                )
            )

    if pts[-1].velocity != 0.0:
        violations.append(
            Violation("terminal_velocity_nonzero", f"{pts[-1].velocity:.3f} m/s", len(pts) - 1)
        )

    return ValidationResult(tuple(violations))


def validate_primary_command(cmd: PrimaryControlCommand, platform: PlatformConfig) -> ValidationResult:
    violations: list[Violation] = []
    if abs(cmd.steering_angle) > platform.max_steering_rad + 1e-9:
        violations.append(
            Violation("steering_exceeded", f"|{cmd.steering_angle:.3f}| > {platform.max_steering_rad:.3f}")
        )
    if not platform.v_min_mps - 1e-9 <= cmd.desired_velocity <= platform.v_max_mps + 1e-9:
        violations.append(
            Violation(
                "velocity_out_of_range",
                f"{cmd.desired_velocity:.3f} not in [{platform.v_min_mps}, {platform.v_max_mps}]",
            )
        )
    return ValidationResult(tuple(violations))


def gear_change_allowed(requested: Gear, current_velocity: float) -> bool:
    """Shifts into Reverse or Park only at standstill."""
    if requested in (Gear.REVERSE, Gear.PARK):
        return abs(current_velocity) < STANDSTILL_MPS
    return True


# --- binary payload codecs --------------------------------------------------
#
# Fixed little-endian layouts for the high-rate streams; everything else
# travels as JSON. These sit inside the transport envelope's payload.

_PRIMARY_FMT = struct.Struct("<ddIQ")
_SECONDARY_FMT = struct.Struct("<bbBQ")  # gear, indicator as -1 = absent
_STATE_FMT = struct.Struct("<dddddBQ")
_TRAJ_HEADER_FMT = struct.Struct("<IQH")
_TRAJ_POINT_FMT = struct.Struct("<dddd")


def encode_primary_command(cmd: PrimaryControlCommand) -> bytes:
    return _PRIMARY_FMT.pack(cmd.steering_angle, cmd.desired_velocity, cmd.sequence, cmd.stamp)


def decode_primary_command(payload: bytes) -> PrimaryControlCommand:
    steering, velocity, sequence, stamp = _PRIMARY_FMT.unpack(payload)
    return PrimaryControlCommand(steering, velocity, sequence, stamp)


def encode_secondary_command(cmd: SecondaryControlCommand) -> bytes:
    gear = -1 if cmd.gear is None else cmd.gear.value
    indicator = -1 if cmd.indicator is None else cmd.indicator.value
    return _SECONDARY_FMT.pack(gear, indicator, int(cmd.horn), cmd.stamp)


def decode_secondary_command(payload: bytes) -> SecondaryControlCommand:
    gear, indicator, horn, stamp = _SECONDARY_FMT.unpack(payload)
    return SecondaryControlCommand(
        gear=None if gear < 0 else Gear(gear),
        indicator=None if indicator < 0 else Indicator(indicator),
        horn=bool(horn),
        stamp=stamp,
    )


def encode_vehicle_state(state: VehicleState) -> bytes:
    return _STATE_FMT.pack(
        state.pose.x,
        state.pose.y,
        state.pose.heading,
        state.velocity,
        state.steering_angle,
        state.gear.value,
        state.stamp,
    )


def decode_vehicle_state(payload: bytes) -> VehicleState:
    x, y, heading, velocity, steering, gear, stamp = _STATE_FMT.unpack(payload)
    return VehicleState(Pose2D(x, y, heading), velocity, steering, Gear(gear), stamp)


def encode_trajectory(trajectory: Trajectory) -> bytes:
    parts = [_TRAJ_HEADER_FMT.pack(trajectory.id, trajectory.stamp, len(trajectory.points))]
    for p in trajectory.points:
        parts.append(_TRAJ_POINT_FMT.pack(p.pose.x, p.pose.y, p.pose.heading, p.velocity))
    return b"".join(parts)


def decode_trajectory(payload: bytes) -> Trajectory:
    traj_id, stamp, n = _TRAJ_HEADER_FMT.unpack_from(payload, 0)
    points = []
    offset = _TRAJ_HEADER_FMT.size
    for _ in range(n):
        x, y, heading, velocity = _TRAJ_POINT_FMT.unpack_from(payload, offset)
        points.append(TrajectoryPoint(Pose2D(x, y, heading), velocity))
        offset += _TRAJ_POINT_FMT.size
    return Trajectory(tuple(points), traj_id, stamp)


# --- JSON-friendly views ------------------------------------------------------

def pose_to_dict(pose: Pose2D) -> dict:
    return {"x": pose.x, "y": pose.y, "heading": pose.heading}


def pose_from_dict(data: dict) -> Pose2D:
    return Pose2D(float(data["x"]), float(data["y"]), float(data["heading"]))


def vehicle_state_to_dict(state: VehicleState) -> dict:
    return {
        "pose": pose_to_dict(state.pose),
        "velocity": state.velocity,
        "steering_angle": state.steering_angle,
        "gear": state.gear.name,
        "stamp": state.stamp,
    }


def vehicle_state_from_dict(data: dict) -> VehicleState:
    return VehicleState(
        pose=pose_from_dict(data["pose"]),
        velocity=float(data["velocity"]),
        steering_angle=float(data["steering_angle"]),
        gear=Gear[data["gear"]],
        stamp=int(data["stamp"]),
    )


def object_to_dict(obj: PerceivedObject) -> dict:
    return {
        "id": obj.id,
        "class": obj.object_class.name,
        "center": pose_to_dict(obj.center),
        "length": obj.length,
        "width": obj.width,
    }


def object_from_dict(data: dict) -> PerceivedObject:
    return PerceivedObject(
        id=int(data["id"]),
        object_class=ObjectClass[data["class"]],
        center=pose_from_dict(data["center"]),
        length=float(data["length"]),
        width=float(data["width"]),
    )


def polyline_to_dict(line: MapPolyline) -> dict:
    return {"id": line.id, "kind": line.kind.name, "vertices": [list(v) for v in line.vertices]}


def polyline_from_dict(data: dict) -> MapPolyline:
    return MapPolyline(
        id=str(data["id"]),
        kind=PolylineKind[data["kind"]],
        vertices=tuple((float(x), float(y)) for x, y in data["vertices"]),
    )


def trajectory_to_dict(trajectory: Trajectory) -> dict:
    return {
        "id": trajectory.id,
        "stamp": trajectory.stamp,
        "points": [
            {"pose": pose_to_dict(p.pose), "velocity": p.velocity} for p in trajectory.points
        ],
    }


def trajectory_from_dict(data: dict) -> Trajectory:
    return Trajectory(
        points=tuple(
            TrajectoryPoint(pose_from_dict(p["pose"]), float(p["velocity"])) for p in data["points"]
        ),
        id=int(data["id"]),
        stamp=int(data["stamp"]),
    )
