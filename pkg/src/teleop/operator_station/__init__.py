"""Operator-side daemon: session manager, command generation, trajectory
editing, UI gateway, and status aggregation."""

from teleop.operator_station.input_mapping import (
    CommandPipeline,
    InputFrame,
    map_input_to_command,
    FRAME_STALE_MS,
    STEERING_SLEW_RAD_PER_S,
)
from teleop.operator_station.trajectory_editor import DraftPoint, TrajectoryDraft
from teleop.operator_station.station import OperatorStation, SessionError

__all__ = [
    "CommandPipeline",
    "DraftPoint",
    "FRAME_STALE_MS",
    "InputFrame",
    "OperatorStation",
    "STEERING_SLEW_RAD_PER_S",
    "SessionError",
    "TrajectoryDraft",
    "map_input_to_command",
]
