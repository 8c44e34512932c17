// Driving input capture: keyboard (A/D steering ramp, W throttle, S brake,
// Space as the dead-man enable) and standard gamepad (axes with deadzone,
// a held enable button). Frames are produced only while the dead-man is
// held and the view has focus; a device disconnect emits a single zero
// frame so the station's staleness logic takes over cleanly.

import { InputFramePayload } from "./protocol.js";

export const GAMEPAD_DEADZONE = 0.05;
export const FRAME_RATE_HZ = 50; // contract floor is 30 Hz

const clamp = (v: number, lo: number, hi: number) => Math.max(lo, Math.min(hi, v));

export function applyDeadzone(value: number, deadzone: number = GAMEPAD_DEADZONE): number {
  if (Math.abs(value) < deadzone) return 0;
  // rescale so output stays continuous at the deadzone edge
  const sign = value < 0 ? -1 : 1;
  return sign * ((Math.abs(value) - deadzone) / (1 - deadzone));
}

export interface InputDriver {
  /** Next frame, or null when nothing may be sent (dead-man, focus, disconnect). */
  sample(nowMs: number): InputFramePayload | null;
}

export class KeyboardDriver implements InputDriver {
  private keys = new Set<string>();
  private focused = true;
  private steering = 0;
  private throttle = 0;
  private lastSampleMs: number | null = null;

  constructor(
    private readonly steeringRampPerS = 1.2,
    private readonly steeringReturnPerS = 2.5,
    private readonly throttleRampPerS = 0.8,
    private readonly throttleDecayPerS = 1.6,
  ) {}

  keyDown(code: string): void {
    this.keys.add(code);
  }

  keyUp(code: string): void {
    this.keys.delete(code);
  }

  setFocused(focused: boolean): void {
    this.focused = focused;
    if (!focused) this.keys.clear(); // keyup events are lost while unfocused
  }

  get enableHeld(): boolean {
    return this.keys.has("Space");
  }

  sample(nowMs: number): InputFramePayload | null {
    const dt = this.lastSampleMs === null ? 1 / FRAME_RATE_HZ : (nowMs - this.lastSampleMs) / 1000;
    this.lastSampleMs = nowMs;

    const left = this.keys.has("KeyA");
    const right = this.keys.has("KeyD");
    if (left !== right) {
      // positive steering axis is to the left
      const target = left ? 1 : -1;
      const step = this.steeringRampPerS * dt;
      this.steering = clamp(this.steering + clamp(target - this.steering, -step, step), -1, 1);
    } else {
      const step = this.steeringReturnPerS * dt;
      this.steering = this.steering - clamp(this.steering, -step, step);
    }

    if (this.keys.has("KeyW")) {
      this.throttle = clamp(this.throttle + this.throttleRampPerS * dt, 0, 1);
    } else {
      this.throttle = clamp(this.throttle - this.throttleDecayPerS * dt, 0, 1);
    }
    const brake = this.keys.has("KeyS") ? 1 : 0;

    if (!this.focused || !this.enableHeld) return null; // dead-man contract
    return {
      steering_axis: this.steering,
      throttle_axis: this.throttle,
      brake_axis: brake,
      stamp: Math.round(nowMs * 1e6), // ms -> ns
      enable: true,
    };
  }
}

export interface GamepadSnapshot {
  axes: number[]; // [steering (left stick x, right = +1)]
  throttle: number; // [0, 1]
  brake: number; // [0, 1]
  enable: boolean; // held shoulder button
}

export class GamepadDriver implements InputDriver {
  private wasConnected = false;
  private sentDisconnectZero = false;

  constructor(
    private readonly poll: () => GamepadSnapshot | null,
    private readonly deadzone = GAMEPAD_DEADZONE,
  ) {}

  sample(nowMs: number): InputFramePayload | null {
    const pad = this.poll();
    if (pad === null) {
      if (this.wasConnected && !this.sentDisconnectZero) {
        this.sentDisconnectZero = true;
        return {
          steering_axis: 0,
          throttle_axis: 0,
          brake_axis: 0,
          stamp: Math.round(nowMs * 1e6),
          enable: false,
        };
      }
      return null; // stream stops; station staleness takes over
    }
    this.wasConnected = true;
    this.sentDisconnectZero = false;
    if (!pad.enable) return null; // dead-man contract
    // stick x is positive to the right; the command frame wants positive
    // left (0 - x rather than -x keeps zero positive)
    const steering = 0 - applyDeadzone(clamp(pad.axes[0] ?? 0, -1, 1), this.deadzone);
    return {
      steering_axis: steering,
      throttle_axis: clamp(pad.throttle, 0, 1),
      brake_axis: clamp(pad.brake, 0, 1),
      stamp: Math.round(nowMs * 1e6),
      enable: true,
    };
  }
}

export class InputPump {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly driver: InputDriver,
    private readonly send: (frame: InputFramePayload) => void,
    private readonly rateHz = FRAME_RATE_HZ,
    private readonly now: () => number = () => Date.now(),
  ) {}

  tick(): void {
    const frame = this.driver.sample(this.now());
    if (frame !== null) this.send(frame);
  }

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => this.tick(), 1000 / this.rateHz);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
