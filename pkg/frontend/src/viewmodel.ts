// Server-authoritative view model: every displayed value is a reduction of
// gateway records. Session state in particular changes only on snapshot,
// ack, or error records carrying the station's manager block — never
// optimistically on user clicks.

import {
  AckPayload,
  DraftState,
  ErrorPayload,
  GatewayRecord,
  ManagerState,
  MapPolyline,
  PerceivedObject,
  SystemStatus,
  VehicleState,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface ViewModel {
  connection: ConnectionState;
  role: "writer" | "mirror" | null;
  manager: ManagerState;
  status: SystemStatus | null;
  vehicleState: VehicleState | null;
  vehicleStateReceivedMs: number | null; // local arrival time for staleness display
  map: MapPolyline[];
  objects: PerceivedObject[];
  draft: DraftState;
  lastAck: AckPayload | null;
  lastError: ErrorPayload | null;
}

const IDLE_MANAGER: ManagerState = {
  operator_state: "IDLE",
  concept: "direct",
  teleoperation_active: false,
  connected: false,
  last_error: null,
};

export function initialViewModel(): ViewModel {
  return {
    connection: "connecting",
    role: null,
    manager: { ...IDLE_MANAGER },
    status: null,
    vehicleState: null,
    vehicleStateReceivedMs: null,
    map: [],
    objects: [],
    draft: { points: [], committed: false, valid: false },
    lastAck: null,
    lastError: null,
  };
}

export function applyRecord(vm: ViewModel, record: GatewayRecord, nowMs: number): ViewModel {
  const payload = record.payload as Record<string, any>;
  switch (record.kind) {
    case "snapshot": {
      return {
        ...vm,
        role: payload.role ?? vm.role,
        manager: payload.manager ?? vm.manager,
        status: payload.status ?? null,
        vehicleState: payload.vehicle_state ?? null,
        vehicleStateReceivedMs: payload.vehicle_state ? nowMs : null,
        map: payload.map ?? [],
        objects: payload.objects ?? [],
        draft: payload.draft ?? vm.draft,
      };
    }
    case "status":
      return { ...vm, status: payload as SystemStatus };
    case "vehicle_state":
      return { ...vm, vehicleState: payload as VehicleState, vehicleStateReceivedMs: nowMs };
    case "objects":
      return { ...vm, objects: (payload.objects ?? payload) as PerceivedObject[] };
    case "map":
      return { ...vm, map: (payload.polylines ?? payload) as MapPolyline[] };
    case "draft":
      return { ...vm, draft: payload as DraftState };
    case "ack": {
      const ack = payload as AckPayload;
      return {
        ...vm,
        lastAck: ack,
        manager: ack.manager ?? vm.manager,
        draft: ack.draft ?? vm.draft,
      };
    }
    case "error": {
      const error = payload as ErrorPayload;
      return {
        ...vm,
        lastError: error,
        manager: error.manager ?? vm.manager,
      };
    }
    default:
      return vm;
  }
}

export function connectionChanged(vm: ViewModel, connection: ConnectionState): ViewModel {
  if (connection === "closed") {
    // a dead gateway means no authoritative session information at all
    return { ...vm, connection, role: null };
  }
  return { ...vm, connection };
}

export class ViewModelStore {
  private vm: ViewModel = initialViewModel();
  private listeners: Array<(vm: ViewModel) => void> = [];

  get current(): ViewModel {
    return this.vm;
  }

  apply(record: GatewayRecord, nowMs: number = Date.now()): void {
    this.vm = applyRecord(this.vm, record, nowMs);
    this.notify();
  }

  setConnection(connection: ConnectionState): void {
    this.vm = connectionChanged(this.vm, connection);
    this.notify();
  }

  subscribe(listener: (vm: ViewModel) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.vm);
  }
}
