import { describe, expect, it } from "vitest";

import { GamepadDriver, GamepadSnapshot, KeyboardDriver, applyDeadzone } from "../src/input.js";

describe("deadzone", () => {
  it("small deflections map to zero", () => {
    expect(applyDeadzone(0.03)).toBe(0);
    expect(applyDeadzone(-0.049)).toBe(0);
  });

  it("full deflection stays full and output is continuous at the edge", () => {
    expect(applyDeadzone(1.0)).toBeCloseTo(1.0, 9);
    expect(applyDeadzone(-1.0)).toBeCloseTo(-1.0, 9);
    expect(Math.abs(applyDeadzone(0.0501))).toBeLessThan(0.01);
  });
});

describe("keyboard driver", () => {
  it("no keys pressed gives neutral axes once enabled", () => {
    const driver = new KeyboardDriver();
    driver.keyDown("Space");
    const frame = driver.sample(0)!;
    expect(frame.steering_axis).toBe(0);
    expect(frame.throttle_axis).toBe(0);
    expect(frame.brake_axis).toBe(0);
  });

  it("no frames without the dead-man enable held", () => {
    const driver = new KeyboardDriver();
    driver.keyDown("KeyW");
    expect(driver.sample(0)).toBeNull();
    driver.keyDown("Space");
    expect(driver.sample(20)).not.toBeNull();
    driver.keyUp("Space");
    expect(driver.sample(40)).toBeNull();
  });

  it("no frames while the view is unfocused", () => {
    const driver = new KeyboardDriver();
    driver.keyDown("Space");
    driver.setFocused(false);
    expect(driver.sample(0)).toBeNull();
  });

  it("A ramps steering left (positive), D right (negative)", () => {
    const driver = new KeyboardDriver();
    driver.keyDown("Space");
    driver.keyDown("KeyA");
    let frame = driver.sample(0)!;
    for (let t = 20; t <= 2000; t += 20) frame = driver.sample(t)!;
    expect(frame.steering_axis).toBeCloseTo(1.0, 5);
    driver.keyUp("KeyA");
    driver.keyDown("KeyD");
    for (let t = 2020; t <= 6000; t += 20) frame = driver.sample(t)!;
    expect(frame.steering_axis).toBeCloseTo(-1.0, 5);
  });

  it("W ramps throttle, S brakes", () => {
    const driver = new KeyboardDriver();
    driver.keyDown("Space");
    driver.keyDown("KeyW");
    let frame = driver.sample(0)!;
    for (let t = 20; t <= 3000; t += 20) frame = driver.sample(t)!;
    expect(frame.throttle_axis).toBeCloseTo(1.0, 5);
    driver.keyDown("KeyS");
    frame = driver.sample(3020)!;
    expect(frame.brake_axis).toBe(1);
  });
});

describe("gamepad driver", () => {
  const pad = (overrides: Partial<GamepadSnapshot>): GamepadSnapshot => ({
    axes: [0],
    throttle: 0,
    brake: 0,
    enable: true,
    ...overrides,
  });

  it("deadzone applies to the steering axis", () => {
    let snapshot: GamepadSnapshot | null = pad({ axes: [0.03] });
    const driver = new GamepadDriver(() => snapshot);
    expect(driver.sample(0)!.steering_axis).toBe(0);
    snapshot = pad({ axes: [-0.8] });
    expect(driver.sample(20)!.steering_axis).toBeGreaterThan(0); // stick right is negative; left positive
  });

  it("no frames while enable is released", () => {
    const driver = new GamepadDriver(() => pad({ enable: false }));
    expect(driver.sample(0)).toBeNull();
  });

  it("disconnect emits one zero frame then stops", () => {
    let snapshot: GamepadSnapshot | null = pad({ throttle: 0.7 });
    const driver = new GamepadDriver(() => snapshot);
    expect(driver.sample(0)!.throttle_axis).toBeCloseTo(0.7);
    snapshot = null;
    const zero = driver.sample(20)!;
    expect(zero.throttle_axis).toBe(0);
    expect(zero.steering_axis).toBe(0);
    expect(zero.enable).toBe(false);
    expect(driver.sample(40)).toBeNull();
    expect(driver.sample(60)).toBeNull();
  });
});
