"""Mapping device input frames onto primary control commands.

Velocity-based mapping: the throttle axis selects a fraction of the
platform's velocity cap, the brake axis scales it back toward zero (full
brake forces zero). Steering passes through a slew limiter that suppresses
input-device jitter. The command pipeline emits at a fixed cadence
regardless of frame arrival: a missing frame repeats the previous command
once, then decays to a zero command.
"""

from __future__ import annotations

from dataclasses import dataclass

from teleop.domain import PlatformConfig, PrimaryControlCommand, clamp

FRAME_STALE_MS = 200.0
STEERING_SLEW_RAD_PER_S = 1.0


@dataclass(frozen=True)
class InputFrame:
    steering_axis: float  # [-1, 1], positive = left
    throttle_axis: float  # [0, 1]
    brake_axis: float  # [0, 1]
    stamp: int  # ns, device time
    gear_up: bool = False
    gear_down: bool = False
    indicator: str = "off"  # off | left | right | hazard
    horn: bool = False
    enable: bool = False  # dead-man switch

    def __post_init__(self) -> None:
        if not -1.0 <= self.steering_axis <= 1.0:
            raise ValueError(f"steering_axis out of range: {self.steering_axis}")
        if not 0.0 <= self.throttle_axis <= 1.0:
            raise ValueError(f"throttle_axis out of range: {self.throttle_axis}")
        if not 0.0 <= self.brake_axis <= 1.0:
            raise ValueError(f"brake_axis out of range: {self.brake_axis}")

    @classmethod
    def neutral(cls, stamp: int = 0) -> "InputFrame":
        return cls(0.0, 0.0, 0.0, stamp)

    def to_dict(self) -> dict:
        return {
            "steering_axis": self.steering_axis,
            "throttle_axis": self.throttle_axis,
            "brake_axis": self.brake_axis,
            "stamp": self.stamp,
            "gear_up": self.gear_up,
            "gear_down": self.gear_down,
            "indicator": self.indicator,
            "horn": self.horn,
            "enable": self.enable,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InputFrame":
        return cls(
            steering_axis=float(data.get("steering_axis", 0.0)),
            throttle_axis=float(data.get("throttle_axis", 0.0)),
            brake_axis=float(data.get("brake_axis", 0.0)),
            stamp=int(data.get("stamp", 0)),
            gear_up=bool(data.get("gear_up", False)),
            gear_down=bool(data.get("gear_down", False)),
            indicator=str(data.get("indicator", "off")),
            horn=bool(data.get("horn", False)),
            enable=bool(data.get("enable", False)),
        )


def map_input_to_command(
    frame: InputFrame,
    platform: PlatformConfig,
    prev_command: PrimaryControlCommand | None,
    *,
    sequence: int,
    stamp: int,
    dt_s: float = 0.02,
    slew_rad_per_s: float = STEERING_SLEW_RAD_PER_S,
) -> PrimaryControlCommand:
    """One frame to one command: affine velocity map plus steering slew."""
    steering_target = frame.steering_axis * platform.max_steering_rad
    prev_steering = prev_command.steering_angle if prev_command is not None else 0.0
    max_step = slew_rad_per_s * dt_s
    steering = prev_steering + clamp(steering_target - prev_steering, -max_step, max_step)
    velocity = frame.throttle_axis * platform.v_max_mps * (1.0 - frame.brake_axis)
    return PrimaryControlCommand(
        steering_angle=clamp(steering, -platform.max_steering_rad, platform.max_steering_rad),
        desired_velocity=clamp(velocity, 0.0, platform.v_max_mps),
        sequence=sequence,
        stamp=stamp,
    )


@dataclass
class CommandPipeline:
    """Fixed-cadence command source fed by whatever frames arrive.

    Emission policy on staleness: repeat the previous command once with a
    fresh stamp, then hold a zero-velocity command with steering slewing
    back to center.
    """

    platform: PlatformConfig
    dt_s: float = 0.02
    frame_stale_ms: float = FRAME_STALE_MS
    slew_rad_per_s: float = STEERING_SLEW_RAD_PER_S
    _sequence: int = 0
    _prev: PrimaryControlCommand | None = None
    _repeated_once: bool = False

    def next_command(self, frame: InputFrame | None, now_ns: int) -> PrimaryControlCommand:
        self._sequence += 1
        fresh = frame is not None and (now_ns - frame.stamp) / 1e6 <= self.frame_stale_ms
        if fresh:
            command = map_input_to_command(
                frame,
                self.platform,
                self._prev,
                sequence=self._sequence,
                stamp=now_ns,
                dt_s=self.dt_s,
                slew_rad_per_s=self.slew_rad_per_s,
            )
            self._repeated_once = False
        elif self._prev is not None and not self._repeated_once:
            command = PrimaryControlCommand(
                self._prev.steering_angle, self._prev.desired_velocity, self._sequence, now_ns
            )
            self._repeated_once = True
        else:
            # hold-zero: velocity 0, steering decays to center at the slew limit
            prev_steering = self._prev.steering_angle if self._prev is not None else 0.0
            max_step = self.slew_rad_per_s * self.dt_s
            steering = prev_steering - clamp(prev_steering, -max_step, max_step)
            command = PrimaryControlCommand(steering, 0.0, self._sequence, now_ns)
        self._prev = command
        return command

    def reset(self) -> None:
        """Zero the output for a concept switch or session restart."""
        self._prev = None
        self._repeated_once = False

    @property
    def sequence(self) -> int:
        return self._sequence
