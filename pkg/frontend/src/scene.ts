// Draw-list construction shared by both views: the scene is a plain data
// structure the canvas painter executes, which keeps all layout and color
// decisions testable without a DOM.

import {
  DraftState,
  MapPolyline,
  OBJECT_CLASS_COLORS,
  PerceivedObject,
  Pose2D,
  VehicleState,
} from "./protocol.js";
import { ViewportTransform, worldToScreen } from "./viewport.js";

export type DrawOp =
  | { op: "polyline"; points: { px: number; py: number }[]; color: string; width: number; dashed?: boolean }
  | { op: "box"; center: { px: number; py: number }; lengthPx: number; widthPx: number; headingRad: number; color: string; fill: boolean; label?: string }
  | { op: "dot"; at: { px: number; py: number }; radiusPx: number; color: string; label?: string };

export interface SceneDrawList {
  ops: DrawOp[];
  greyed: boolean;
}

const MAP_COLORS: Record<string, string> = {
  LANE_BOUNDARY: "#d9d9d9",
  DRIVABLE_EDGE: "#8c8c8c",
};

export const VEHICLE_COLOR = "#f5f5f5";
export const COMMITTED_TRAJECTORY_COLOR = "#1e6fd9";
export const DRAFT_COLOR = "#f1c40f";
export const DRAFT_VIOLATION_COLOR = "#e74c3c";

export function objectColor(objectClass: string): string {
  return OBJECT_CLASS_COLORS[objectClass] ?? OBJECT_CLASS_COLORS.UNKNOWN;
}

export function mapOps(map: MapPolyline[], t: ViewportTransform): DrawOp[] {
  return map.map((line) => ({
    op: "polyline" as const,
    points: line.vertices.map(([x, y]) => worldToScreen(t, x, y)),
    color: MAP_COLORS[line.kind] ?? "#666666",
    width: line.kind === "LANE_BOUNDARY" ? 1 : 2,
    dashed: line.kind === "LANE_BOUNDARY",
  }));
}

export function objectOps(objects: PerceivedObject[], t: ViewportTransform): DrawOp[] {
  return objects.map((obj) => ({
    op: "box" as const,
    center: worldToScreen(t, obj.center.x, obj.center.y),
    lengthPx: obj.length * t.pxPerMeter,
    widthPx: obj.width * t.pxPerMeter,
    headingRad: obj.center.heading,
    color: objectColor(obj.class),
    fill: true,
    label: obj.class,
  }));
}

export function vehicleOp(pose: Pose2D, t: ViewportTransform, lengthM = 4.6, widthM = 1.9): DrawOp {
  return {
    op: "box",
    center: worldToScreen(t, pose.x, pose.y),
    lengthPx: lengthM * t.pxPerMeter,
    widthPx: widthM * t.pxPerMeter,
    headingRad: pose.heading,
    color: VEHICLE_COLOR,
    fill: false,
    label: "ego",
  };
}

export function draftOps(draft: DraftState, t: ViewportTransform): DrawOp[] {
  const ops: DrawOp[] = [];
  if (draft.points.length >= 2) {
    ops.push({
      op: "polyline",
      points: draft.points.map((p) => worldToScreen(t, p.x, p.y)),
      color: DRAFT_COLOR,
      width: 2,
      dashed: !draft.committed,
    });
  }
  for (const point of draft.points) {
    ops.push({
      op: "dot",
      at: worldToScreen(t, point.x, point.y),
      radiusPx: 4,
      color: point.violations.length > 0 ? DRAFT_VIOLATION_COLOR : DRAFT_COLOR,
      label: point.violations.length > 0 ? point.violations.join("; ") : `${point.velocity.toFixed(1)} m/s`,
    });
  }
  return ops;
}

export function committedTrajectoryOps(points: { x: number; y: number }[], t: ViewportTransform): DrawOp[] {
  if (points.length < 2) return [];
  return [
    {
      op: "polyline",
      points: points.map((p) => worldToScreen(t, p.x, p.y)),
      color: COMMITTED_TRAJECTORY_COLOR,
      width: 3,
    },
  ];
}

export function sceneFor(
  vehicle: VehicleState | null,
  map: MapPolyline[],
  objects: PerceivedObject[],
  t: ViewportTransform,
  greyed: boolean,
): SceneDrawList {
  const ops: DrawOp[] = [...mapOps(map, t), ...objectOps(objects, t)];
  if (vehicle !== null) {
    ops.push(vehicleOp(vehicle.pose, t));
  }
  return { ops, greyed };
}
