// World <-> screen mapping for the top-down map. World is meters, y up;
// screen is pixels, y down, origin top-left. Pan/zoom hard-locks while
// teleoperation is active (the view should stay still during driving)
// unless the operator explicitly unlocks it.

export interface ViewportTransform {
  centerX: number; // world meters at the canvas center
  centerY: number;
  pxPerMeter: number;
  width: number; // canvas pixels
  height: number;
}

export function worldToScreen(t: ViewportTransform, x: number, y: number): { px: number; py: number } {
  return {
    px: t.width / 2 + (x - t.centerX) * t.pxPerMeter,
    py: t.height / 2 - (y - t.centerY) * t.pxPerMeter,
  };
}

export function screenToWorld(t: ViewportTransform, px: number, py: number): { x: number; y: number } {
  return {
    x: t.centerX + (px - t.width / 2) / t.pxPerMeter,
    y: t.centerY - (py - t.height / 2) / t.pxPerMeter,
  };
}

export function insideCanvas(t: ViewportTransform, px: number, py: number): boolean {
  return px >= 0 && px <= t.width && py >= 0 && py <= t.height;
}

export class ViewportController {
  transform: ViewportTransform;
  lockWhileDriving = true;
  private driving = false;

  constructor(transform: ViewportTransform) {
    this.transform = transform;
  }

  setDriving(driving: boolean): void {
    this.driving = driving;
  }

  get locked(): boolean {
    return this.lockWhileDriving && this.driving;
  }

  pan(dxPx: number, dyPx: number): boolean {
    if (this.locked) return false;
    this.transform = {
      ...this.transform,
      centerX: this.transform.centerX - dxPx / this.transform.pxPerMeter,
      centerY: this.transform.centerY + dyPx / this.transform.pxPerMeter,
    };
    return true;
  }

  zoom(factor: number, anchorPx?: { px: number; py: number }): boolean {
    if (this.locked) return false;
    const before = anchorPx ? screenToWorld(this.transform, anchorPx.px, anchorPx.py) : null;
    const pxPerMeter = Math.min(200, Math.max(0.5, this.transform.pxPerMeter * factor));
    this.transform = { ...this.transform, pxPerMeter };
    if (before && anchorPx) {
      // keep the anchor point under the cursor
      const after = screenToWorld(this.transform, anchorPx.px, anchorPx.py);
      this.transform = {
        ...this.transform,
        centerX: this.transform.centerX + (before.x - after.x),
        centerY: this.transform.centerY + (before.y - after.y),
      };
    }
    return true;
  }

  follow(x: number, y: number): void {
    // tracking the vehicle is not a manual view change; allowed while locked
    this.transform = { ...this.transform, centerX: x, centerY: y };
  }
}
