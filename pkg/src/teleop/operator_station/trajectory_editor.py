"""Waypoint-by-waypoint trajectory drafting with live validation notes.

Edits never block: a point that over-tightens the curvature stays in the
draft with a violation annotation attached to it. Committing is the strict
step; it requires the built trajectory to validate cleanly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from teleop.domain import (
    PlatformConfig,
    Pose2D,
    Trajectory,
    TrajectoryPoint,
    normalize_heading,
    validate_trajectory,
)


@dataclass(frozen=True)
class DraftPoint:
    x: float
    y: float
    velocity: float
    violations: tuple[str, ...] = ()


class TrajectoryDraft:
    """Waypoints under edit plus per-point validation annotations."""

    def __init__(self, platform: PlatformConfig):
        self.platform = platform
        self.points: list[DraftPoint] = []
        self.committed = False
        self._next_id = 1

    # -- edit actions ------------------------------------------------------

    def append(self, x: float, y: float, velocity: float) -> None:
        self.points.append(DraftPoint(float(x), float(y), max(0.0, float(velocity))))
        self.committed = False
        self._annotate()

    def undo(self) -> None:
        if self.points:
            self.points.pop()
            self.committed = False
            self._annotate()

    def set_velocity(self, index: int, velocity: float) -> None:
        if not 0 <= index < len(self.points):
            raise IndexError(f"no draft point at index {index}")
        self.points[index] = replace(self.points[index], velocity=max(0.0, float(velocity)))
        self.committed = False
        self._annotate()

    def clear(self) -> None:
        self.points.clear()
        self.committed = False

    def apply(self, action: dict) -> None:
        """Gateway-facing action dispatch: {action: append|undo|set_velocity|clear, ...}."""
        kind = action.get("action")
        if kind == "append":
            self.append(action["x"], action["y"], action.get("velocity", 0.0))
        elif kind == "undo":
            self.undo()
        elif kind == "set_velocity":
            self.set_velocity(int(action["index"]), action["velocity"])
        elif kind == "clear":
            self.clear()
        else:
            raise ValueError(f"unknown draft action {kind!r}")

    # -- validation and building -------------------------------------------

    def _headings(self) -> list[float]:
        headings = []
        for i, point in enumerate(self.points):
            if i + 1 < len(self.points):
                nxt = self.points[i + 1]
                headings.append(normalize_heading(math.atan2(nxt.y - point.y, nxt.x - point.x)))
            elif headings:
                headings.append(headings[-1])
            else:
                headings.append(0.0)
        return headings

    def build(self, trajectory_id: int | None = None, stamp: int = 0) -> Trajectory:
        if len(self.points) < 2:
            raise ValueError("a trajectory needs at least 2 waypoints")
        if trajectory_id is None:
            trajectory_id = self._next_id
        headings = self._headings()
        points = tuple(
            TrajectoryPoint(Pose2D(p.x, p.y, h), p.velocity) for p, h in zip(self.points, headings)
        )
        return Trajectory(points, trajectory_id, stamp)

    def _annotate(self) -> None:
        notes: dict[int, list[str]] = {i: [] for i in range(len(self.points))}
        if len(self.points) >= 2:
            result = validate_trajectory(self.build(trajectory_id=0), self.platform)
            for violation in result.violations:
                index = violation.point_index if violation.point_index is not None else len(self.points) - 1
                notes[index].append(f"{violation.code}: {violation.detail}")
        self.points = [
            replace(point, violations=tuple(notes[i])) for i, point in enumerate(self.points)
        ]

    def validation_ok(self) -> bool:
        if len(self.points) < 2:
            return False
        return validate_trajectory(self.build(trajectory_id=0), self.platform).ok

    def mark_committed(self, trajectory_id: int) -> None:
        self.committed = True
        self._next_id = trajectory_id + 1

    def to_dict(self) -> dict:
        return {
            "points": [
                {"x": p.x, "y": p.y, "velocity": p.velocity, "violations": list(p.violations)}
                for p in self.points
            ],
            "committed": self.committed,
            "valid": self.validation_ok(),
        }
