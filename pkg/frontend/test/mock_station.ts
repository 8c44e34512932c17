// Scripted stand-in for the operator station's gateway: same record kinds,
// same ack discipline (session state changes arrive only via acks), and a
// station-side trajectory draft fed by traj_edit records.

import { AddressInfo } from "node:net";
import { WebSocketServer, WebSocket } from "ws";

export interface MockDraftPoint {
  x: number;
  y: number;
  velocity: number;
}

type OperatorState = "IDLE" | "UPLINK" | "TELEOPERATION";

const SESSION_TRANSITIONS: Record<string, [OperatorState, OperatorState]> = {
  // action: [required state, next state]
  connect: ["IDLE", "UPLINK"],
  start: ["UPLINK", "TELEOPERATION"],
  stop: ["TELEOPERATION", "UPLINK"],
  disconnect: ["UPLINK", "IDLE"],
};

export class MockStationServer {
  readonly server: WebSocketServer;
  state: OperatorState = "IDLE";
  concept: "direct" | "trajectory" = "direct";
  draftPoints: MockDraftPoint[] = [];
  ackDelayMs = 40;
  inputFrames: unknown[] = [];
  readonly url: Promise<string>;

  constructor() {
    this.server = new WebSocketServer({ host: "127.0.0.1", port: 0 });
    this.url = new Promise((resolve) => {
      this.server.on("listening", () => {
        const address = this.server.address() as AddressInfo;
        resolve(`ws://127.0.0.1:${address.port}`);
      });
    });
    this.server.on("connection", (socket) => this.handle(socket));
  }

  private manager() {
    return {
      operator_state: this.state,
      concept: this.concept,
      teleoperation_active: this.state === "TELEOPERATION",
      connected: this.state !== "IDLE",
      last_error: null,
    };
  }

  private draft() {
    return {
      points: this.draftPoints.map((p) => ({ ...p, violations: [] as string[] })),
      committed: false,
      valid: this.draftPoints.length >= 2,
    };
  }

  private send(socket: WebSocket, kind: string, payload: unknown) {
    socket.send(JSON.stringify({ kind, payload, stamp: Date.now() * 1e6 }));
  }

  private handle(socket: WebSocket) {
    this.send(socket, "snapshot", {
      role: "writer",
      manager: this.manager(),
      status: null,
      vehicle_state: null,
      objects: [],
      map: [],
      draft: this.draft(),
    });
    socket.on("message", (raw) => {
      let message: any;
      try {
        message = JSON.parse(String(raw));
      } catch {
        this.send(socket, "error", { detail: "malformed message" });
        return;
      }
      const reply = (kind: string, payload: unknown) => this.send(socket, kind, payload);
      switch (message.kind) {
        case "input":
          this.inputFrames.push(message.payload);
          return; // no per-frame acks
        case "traj_edit": {
          const action = message.payload?.action;
          if (action === "append") {
            this.draftPoints.push({
              x: message.payload.x,
              y: message.payload.y,
              velocity: message.payload.velocity ?? 0,
            });
          } else if (action === "undo") {
            this.draftPoints.pop();
          } else if (action === "clear") {
            this.draftPoints = [];
          } else if (action === "set_velocity") {
            const point = this.draftPoints[message.payload.index];
            if (point) point.velocity = message.payload.velocity;
          }
          reply("ack", { for: "traj_edit", id: message.id, ok: true, manager: this.manager(), draft: this.draft() });
          return;
        }
        case "traj_commit":
          reply("ack", {
            for: "traj_commit", id: message.id, ok: true, manager: this.manager(),
            trajectory_id: 1, draft: { ...this.draft(), committed: true },
          });
          return;
        case "session_cmd": {
          const action = message.payload?.action;
          if (action === "set_concept") {
            this.concept = message.payload.concept;
            setTimeout(
              () => reply("ack", { for: "session_cmd", id: message.id, ok: true, manager: this.manager() }),
              this.ackDelayMs,
            );
            return;
          }
          const transition = SESSION_TRANSITIONS[action];
          if (!transition) {
            reply("error", { detail: `unknown session action ${action}`, for: "session_cmd", id: message.id });
            return;
          }
          const [required, next] = transition;
          setTimeout(() => {
            if (this.state !== required) {
              reply("error", {
                detail: `no transition from ${this.state} on ${action}`,
                for: "session_cmd", id: message.id, manager: this.manager(),
              });
              return;
            }
            this.state = next;
            reply("ack", { for: "session_cmd", id: message.id, ok: true, manager: this.manager() });
          }, this.ackDelayMs);
          return;
        }
        default:
          reply("error", { detail: `unknown kind ${message.kind}`, id: message.id });
      }
    });
  }

  async close(): Promise<void> {
    for (const client of this.server.clients) client.terminate();
    await new Promise<void>((resolve) => this.server.close(() => resolve()));
  }
}

export function wsFactory() {
  return (url: string) => new WebSocket(url) as any;
}
