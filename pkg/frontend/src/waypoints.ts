// Click-to-waypoint placement: screen pixels invert through the current
// viewport transform into world meters, the velocity comes from the slider
// value at click time, and the append rides a traj_edit record. Validation
// stays server-side; violating points come back annotated, not rejected.

import { GatewayClient } from "./gateway.js";
import { ViewportTransform, insideCanvas, screenToWorld } from "./viewport.js";

export interface WaypointPlacement {
  sent: boolean;
  x?: number;
  y?: number;
  hint?: string;
}

export function placeWaypoint(
  gateway: GatewayClient,
  transform: ViewportTransform,
  clickPx: number,
  clickPy: number,
  velocityMps: number,
): WaypointPlacement {
  if (!insideCanvas(transform, clickPx, clickPy)) {
    return { sent: false, hint: "click outside map bounds" };
  }
  const { x, y } = screenToWorld(transform, clickPx, clickPy);
  gateway.send("traj_edit", { action: "append", x, y, velocity: velocityMps });
  return { sent: true, x, y };
}

export function undoWaypoint(gateway: GatewayClient): void {
  gateway.send("traj_edit", { action: "undo" });
}

export function clearDraft(gateway: GatewayClient): void {
  gateway.send("traj_edit", { action: "clear" });
}

export function setWaypointVelocity(gateway: GatewayClient, index: number, velocityMps: number): void {
  gateway.send("traj_edit", { action: "set_velocity", index, velocity: velocityMps });
}

export function commitDraft(gateway: GatewayClient): string {
  return gateway.send("traj_commit", {});
}
