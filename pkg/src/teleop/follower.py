"""Pure-pursuit trajectory follower with a per-point velocity profile.

Geometric follower: find the goal point one lookahead distance along the
path beyond the vehicle's projection, then steer with
atan(2 L sin(alpha) / d) where alpha is the heading error to the goal in
the vehicle frame and d the distance to it. Lookahead scales with speed so
low-speed maneuvering stays tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from teleop.domain import Pose2D, Trajectory, clamp, normalize_heading

MIN_LOOKAHEAD_M = 2.0
LOOKAHEAD_TIME_S = 0.8
DONE_REMAINING_M = 0.25


def speed_scaled_lookahead(velocity_mps: float) -> float:
    return max(MIN_LOOKAHEAD_M, LOOKAHEAD_TIME_S * abs(velocity_mps))


@dataclass(frozen=True)
class SteerSolution:
    steering_angle: float
    nearest_index: int  # segment index of the projection
    vehicle_arc_m: float
    cross_track_m: float
    goal: tuple[float, float]
    done: bool


def project_onto_path(
    pose: Pose2D,
    trajectory: Trajectory,
    arcs: list[float],
    start_index: int = 0,
    window_m: float = math.inf,
) -> tuple[int, float, float]:
    """Project the pose onto the path at or after start_index.

    Returns (segment index, arc position, distance to path). ``window_m``
    bounds the forward search in arc length; a self-overlapping path (a
    loop driven more than once) would otherwise let the projection jump
    laps whenever a later pass happens to lie marginally closer.
    """
    pts = trajectory.points
    first = min(start_index, len(pts) - 2)
    best_index = first
    best_arc = arcs[first]
    best_dist = math.inf
    horizon = arcs[first] + window_m
    for i in range(first, len(pts) - 1):
        if arcs[i] > horizon:
            break
        ax, ay = pts[i].pose.x, pts[i].pose.y
        bx, by = pts[i + 1].pose.x, pts[i + 1].pose.y
        seg_dx, seg_dy = bx - ax, by - ay
        seg_len_sq = seg_dx * seg_dx + seg_dy * seg_dy
        if seg_len_sq <= 0.0:
            continue
        t = clamp(((pose.x - ax) * seg_dx + (pose.y - ay) * seg_dy) / seg_len_sq, 0.0, 1.0)
        px, py = ax + t * seg_dx, ay + t * seg_dy
        dist = math.hypot(pose.x - px, pose.y - py)
        if dist < best_dist - 1e-12:
            best_dist = dist
            best_index = i
            best_arc = arcs[i] + t * math.sqrt(seg_len_sq)
    return best_index, best_arc, best_dist


def point_at_arc(trajectory: Trajectory, arcs: list[float], arc_m: float) -> tuple[float, float]:
    pts = trajectory.points
    if arc_m >= arcs[-1]:
        return pts[-1].pose.x, pts[-1].pose.y
    if arc_m <= 0.0:
        return pts[0].pose.x, pts[0].pose.y
    i = 0
    while arcs[i + 1] < arc_m:
        i += 1
    seg = arcs[i + 1] - arcs[i]
    t = 0.0 if seg <= 0.0 else (arc_m - arcs[i]) / seg
    a, b = pts[i].pose, pts[i + 1].pose
    return a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)


def solve_pure_pursuit(
    pose: Pose2D,
    trajectory: Trajectory,
    lookahead_m: float,
    wheelbase_m: float,
    *,
    arcs: list[float] | None = None,
    start_index: int = 0,
    window_m: float = math.inf,
    max_steering_rad: float = math.inf,
) -> SteerSolution:
    if lookahead_m <= 0.0:
        raise ValueError("lookahead must be > 0")
    if arcs is None:
        arcs = trajectory.arc_lengths()
    index, vehicle_arc, cross_track = project_onto_path(pose, trajectory, arcs, start_index, window_m)
    remaining = arcs[-1] - vehicle_arc
    done = remaining <= DONE_REMAINING_M
    goal = point_at_arc(trajectory, arcs, vehicle_arc + lookahead_m)
    goal_dx = goal[0] - pose.x
    goal_dy = goal[1] - pose.y
    goal_dist = math.hypot(goal_dx, goal_dy)
    if goal_dist < 1e-9:
        steering = 0.0
    else:
        alpha = normalize_heading(math.atan2(goal_dy, goal_dx) - pose.heading)
        steering = math.atan(2.0 * wheelbase_m * math.sin(alpha) / goal_dist)
    steering = clamp(steering, -max_steering_rad, max_steering_rad)
    return SteerSolution(steering, index, vehicle_arc, cross_track, goal, done)


def pure_pursuit_steer(
    pose: Pose2D,
    trajectory: Trajectory,
    lookahead_m: float,
    wheelbase_m: float,
    max_steering_rad: float = math.inf,
) -> float:
    """Steering angle toward the lookahead goal point, clamped."""
    return solve_pure_pursuit(
        pose, trajectory, lookahead_m, wheelbase_m, max_steering_rad=max_steering_rad
    ).steering_angle


def interpolate_velocity(trajectory: Trajectory, nearest_index: int, arc_offset_m: float) -> float:
    """Linear interpolation of per-point velocities along arc length.

    Positions beyond the final point saturate at 0 (the terminal-velocity
    invariant guarantees the profile ends there anyway).
    """
    arcs = trajectory.arc_lengths()
    s = arcs[min(nearest_index, len(arcs) - 1)] + arc_offset_m
    if s >= arcs[-1]:
        return 0.0
    if s <= 0.0:
        return trajectory.points[0].velocity
    i = 0
    while arcs[i + 1] < s:
        i += 1
    seg = arcs[i + 1] - arcs[i]
    t = 0.0 if seg <= 0.0 else (s - arcs[i]) / seg
    return trajectory.points[i].velocity + t * (trajectory.points[i + 1].velocity - trajectory.points[i].velocity)


@dataclass
class FollowerState:
    trajectory: Trajectory
    nearest_index: int = 0
    lookahead_m: float = MIN_LOOKAHEAD_M
    done: bool = False


class TrajectoryFollower:
    """Stateful follower enforcing monotone progress along one trajectory."""

    # forward projection window once engaged; wide enough for any single
    # control period plus the lookahead, narrow enough not to skip laps
    SEARCH_WINDOW_M = 15.0

    def __init__(self, wheelbase_m: float, max_steering_rad: float):
        self.wheelbase_m = wheelbase_m
        self.max_steering_rad = max_steering_rad
        self.state: FollowerState | None = None
        self._arcs: list[float] | None = None
        self._last_steering = 0.0
        self._engaged = False

    @property
    def active(self) -> bool:
        return self.state is not None and not self.state.done

    def set_trajectory(self, trajectory: Trajectory) -> None:
        """Atomically replace the active trajectory; progress is discarded."""
        self.state = FollowerState(trajectory=trajectory)
        self._arcs = trajectory.arc_lengths()
        self._last_steering = 0.0
        self._engaged = False  # first update projects over the whole path

    def clear(self) -> None:
        self.state = None
        self._arcs = None
        self._engaged = False

    def update(self, pose: Pose2D, velocity_mps: float) -> tuple[float, float, SteerSolution | None]:
        """One control step: (steering setpoint, velocity setpoint, solution)."""
        if self.state is None:
            return 0.0, 0.0, None
        if self.state.done:
            return self._last_steering, 0.0, None
        lookahead = speed_scaled_lookahead(velocity_mps)
        solution = solve_pure_pursuit(
            pose,
            self.state.trajectory,
            lookahead,
            self.wheelbase_m,
            arcs=self._arcs,
            start_index=self.state.nearest_index,
            window_m=self.SEARCH_WINDOW_M if self._engaged else math.inf,
            max_steering_rad=self.max_steering_rad,
        )
        self._engaged = True
        # progress is monotone: the projection never walks backward
        self.state.nearest_index = max(self.state.nearest_index, solution.nearest_index)
        self.state.lookahead_m = lookahead
        if solution.done:
            self.state.done = True
            return solution.steering_angle, 0.0, solution
        arc_offset = solution.vehicle_arc_m - self._arcs[solution.nearest_index]
        velocity = interpolate_velocity(self.state.trajectory, solution.nearest_index, arc_offset)
        self._last_steering = solution.steering_angle
        return solution.steering_angle, velocity, solution
