// Screen composition for the two remote-driving modes. Both views share
// the bottom bar (target and actual speed, gear, network latency) and the
// mode badge, which turns blue while teleoperation is active.

import { TELEOPERATION_BADGE_COLOR } from "./protocol.js";
import { SceneDrawList, draftOps, sceneFor } from "./scene.js";
import { ViewModel } from "./viewmodel.js";
import { ViewportTransform } from "./viewport.js";

export const VEHICLE_STATE_STALE_MS = 500;
const IDLE_BADGE_COLOR = "#555555";

export interface BottomBar {
  targetSpeedMps: number | null;
  actualSpeedMps: number | null;
  gear: string | null;
  latencyMs: number | null;
  latencyText: string;
}

export interface ModeBadge {
  label: string;
  color: string;
  active: boolean;
}

export interface DirectControlScreen {
  scene: SceneDrawList;
  bottomBar: BottomBar;
  modeBadge: ModeBadge;
  staleWarning: string | null;
}

export interface TrajectoryGuidanceScreen {
  forwardScene: SceneDrawList; // upper half: forward-view placeholder scene
  mapScene: SceneDrawList; // lower half: top-down map with draft overlay
  split: "horizontal";
  bottomBar: BottomBar;
  modeBadge: ModeBadge;
  draftSummary: { points: number; valid: boolean; committed: boolean };
  staleWarning: string | null;
}

export function bottomBar(vm: ViewModel, targetSpeedMps: number | null): BottomBar {
  const latency = vm.status?.link?.latency_p50_ms ?? null;
  return {
    targetSpeedMps,
    actualSpeedMps: vm.vehicleState?.velocity ?? null,
    gear: vm.vehicleState?.gear ?? null,
    latencyMs: latency,
    latencyText: latency === null ? "--" : `${Math.round(latency)} ms`,
  };
}

export function modeBadge(vm: ViewModel): ModeBadge {
  const active = vm.manager.teleoperation_active;
  const label = vm.manager.concept === "direct" ? "Direct Control" : "Trajectory Guidance";
  return { label, color: active ? TELEOPERATION_BADGE_COLOR : IDLE_BADGE_COLOR, active };
}

export function vehicleStateStale(vm: ViewModel, nowMs: number): boolean {
  if (vm.vehicleStateReceivedMs === null) return true;
  return nowMs - vm.vehicleStateReceivedMs > VEHICLE_STATE_STALE_MS;
}

export function renderDirectControlView(
  vm: ViewModel,
  viewport: ViewportTransform,
  nowMs: number,
  targetSpeedMps: number | null = null,
): DirectControlScreen {
  const stale = vehicleStateStale(vm, nowMs);
  return {
    scene: sceneFor(vm.vehicleState, vm.map, vm.objects, viewport, stale),
    bottomBar: bottomBar(vm, targetSpeedMps),
    modeBadge: modeBadge(vm),
    staleWarning: stale ? "vehicle state stale" : null,
  };
}

export function renderTrajectoryView(
  vm: ViewModel,
  viewport: ViewportTransform,
  nowMs: number,
): TrajectoryGuidanceScreen {
  const stale = vehicleStateStale(vm, nowMs);
  const mapScene = sceneFor(vm.vehicleState, vm.map, vm.objects, viewport, stale);
  mapScene.ops.push(...draftOps(vm.draft, viewport));
  return {
    forwardScene: sceneFor(vm.vehicleState, vm.map, vm.objects, viewport, stale),
    mapScene,
    split: "horizontal",
    bottomBar: bottomBar(vm, null),
    modeBadge: modeBadge(vm),
    draftSummary: {
      points: vm.draft.points.length,
      valid: vm.draft.valid,
      committed: vm.draft.committed,
    },
    staleWarning: stale ? "vehicle state stale" : null,
  };
}
