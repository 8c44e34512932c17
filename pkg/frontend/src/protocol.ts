// Typed records of the station's WebSocket gateway. Everything the UI
// displays derives from these; the UI never invents vehicle state.

export type OutboundKind = "input" | "session_cmd" | "traj_edit" | "traj_commit";

export interface GatewayRecord {
  kind: string;
  payload: Record<string, unknown>;
  stamp?: number;
  id?: string;
}

export interface ManagerState {
  operator_state: "IDLE" | "UPLINK" | "TELEOPERATION";
  concept: "direct" | "trajectory";
  teleoperation_active: boolean;
  connected: boolean;
  last_error: string | null;
}

export interface LinkStats {
  latency_p50_ms: number;
  latency_p95_ms: number;
  jitter_ms: number;
  bandwidth_bytes_per_s: number;
  loss_ratio: number;
  window_s: number;
}

export interface StreamHealth {
  measured_rate_hz: number;
  expected_rate_hz: number;
  staleness_ms: number | null;
  status: "Healthy" | "Degraded" | "Stale";
}

export interface SystemStatus {
  operator_state: string;
  vehicle_state: string;
  teleoperation_active: boolean;
  concept: string | null;
  link: LinkStats | null;
  streams: Record<string, StreamHealth>;
  command_path_ok: boolean;
  stamp: number;
}

export interface Pose2D {
  x: number;
  y: number;
  heading: number;
}

export interface VehicleState {
  pose: Pose2D;
  velocity: number;
  steering_angle: number;
  gear: string;
  stamp: number;
}

export interface PerceivedObject {
  id: number;
  class: string;
  center: Pose2D;
  length: number;
  width: number;
}

export interface MapPolyline {
  id: string;
  kind: string;
  vertices: [number, number][];
}

export interface DraftPoint {
  x: number;
  y: number;
  velocity: number;
  violations: string[];
}

export interface DraftState {
  points: DraftPoint[];
  committed: boolean;
  valid: boolean;
}

export interface AckPayload {
  for: OutboundKind;
  id?: string;
  ok: boolean;
  manager?: ManagerState;
  draft?: DraftState;
  trajectory_id?: number;
  [key: string]: unknown;
}

export interface ErrorPayload {
  detail: string;
  for?: string;
  id?: string;
  manager?: ManagerState;
  violations?: string[];
}

export interface InputFramePayload {
  steering_axis: number;
  throttle_axis: number;
  brake_axis: number;
  stamp: number;
  gear_up?: boolean;
  gear_down?: boolean;
  indicator?: string;
  horn?: boolean;
  enable?: boolean;
}

export const OBJECT_CLASS_COLORS: Record<string, string> = {
  PASSENGER_VEHICLE: "#1abc9c", // teal
  TRUCK: "#e67e22",
  PEDESTRIAN: "#e74c3c",
  CYCLIST: "#2ecc71",
  UNKNOWN: "#95a5a6",
};

export const TELEOPERATION_BADGE_COLOR = "#1e6fd9"; // active mode shows blue
