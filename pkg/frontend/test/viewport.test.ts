import { describe, expect, it } from "vitest";

import { ViewportController, ViewportTransform, insideCanvas, screenToWorld, worldToScreen } from "../src/viewport.js";

const T: ViewportTransform = { centerX: 50, centerY: 10, pxPerMeter: 10, width: 800, height: 600 };

describe("viewport transform", () => {
  it("maps the world center to the canvas center", () => {
    expect(worldToScreen(T, 50, 10)).toEqual({ px: 400, py: 300 });
  });

  it("screen y grows downward while world y grows north", () => {
    const north = worldToScreen(T, 50, 20);
    expect(north.py).toBeLessThan(300);
  });

  it("inverts exactly", () => {
    for (const [x, y] of [[0, 0], [50, 10], [123.4, -56.7], [-3.2, 8.8]] as const) {
      const screen = worldToScreen(T, x, y);
      const world = screenToWorld(T, screen.px, screen.py);
      expect(world.x).toBeCloseTo(x, 9);
      expect(world.y).toBeCloseTo(y, 9);
    }
  });

  it("fifty pixels at 10 px/m is five meters", () => {
    const a = screenToWorld(T, 400, 300);
    const b = screenToWorld(T, 450, 300);
    expect(b.x - a.x).toBeCloseTo(5.0, 9);
  });

  it("bounds checking", () => {
    expect(insideCanvas(T, 0, 0)).toBe(true);
    expect(insideCanvas(T, 800, 600)).toBe(true);
    expect(insideCanvas(T, -1, 10)).toBe(false);
    expect(insideCanvas(T, 10, 601)).toBe(false);
  });
});

describe("viewport controller", () => {
  it("pan and zoom apply when not driving", () => {
    const controller = new ViewportController({ ...T });
    expect(controller.pan(10, 0)).toBe(true);
    expect(controller.transform.centerX).toBeCloseTo(49);
    expect(controller.zoom(2)).toBe(true);
    expect(controller.transform.pxPerMeter).toBeCloseTo(20);
  });

  it("hard-locks manual view changes while teleoperation is active", () => {
    const controller = new ViewportController({ ...T });
    controller.setDriving(true);
    expect(controller.pan(10, 0)).toBe(false);
    expect(controller.zoom(2)).toBe(false);
    expect(controller.transform).toEqual(T);
  });

  it("lock is a configurable preference", () => {
    const controller = new ViewportController({ ...T });
    controller.lockWhileDriving = false;
    controller.setDriving(true);
    expect(controller.pan(10, 0)).toBe(true);
  });

  it("vehicle following is allowed while locked", () => {
    const controller = new ViewportController({ ...T });
    controller.setDriving(true);
    controller.follow(99, 3);
    expect(controller.transform.centerX).toBe(99);
    expect(controller.transform.centerY).toBe(3);
  });

  it("zoom keeps the anchor point fixed", () => {
    const controller = new ViewportController({ ...T });
    const anchor = { px: 500, py: 200 };
    const before = screenToWorld(controller.transform, anchor.px, anchor.py);
    controller.zoom(1.5, anchor);
    const after = screenToWorld(controller.transform, anchor.px, anchor.py);
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });
});
