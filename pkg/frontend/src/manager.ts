// Manager panel controller: session setup and coordination. Actions send
// session_cmd records; the displayed state mirrors station acks and is
// never updated optimistically.

import { GatewayClient } from "./gateway.js";
import { ViewModelStore } from "./viewmodel.js";

export type SessionAction = "connect" | "disconnect" | "start" | "stop" | "set_concept";

export interface PanelView {
  operatorState: string;
  concept: string;
  connectionText: string;
  busyAction: SessionAction | null;
  actionsEnabled: boolean;
  lastError: string | null;
}

export class ManagerPanel {
  private busy: SessionAction | null = null;
  private pending = new Map<string, SessionAction>();

  constructor(
    private readonly gateway: GatewayClient,
    private readonly store: ViewModelStore,
  ) {
    gateway.onRecord((record) => {
      const id = (record.payload as any)?.id as string | undefined;
      if ((record.kind === "ack" || record.kind === "error") && id && this.pending.has(id)) {
        this.pending.delete(id);
        if (this.pending.size === 0) this.busy = null;
      }
    });
  }

  private sendAction(action: SessionAction, extra: Record<string, unknown> = {}): string {
    const id = this.gateway.send("session_cmd", { action, ...extra });
    this.pending.set(id, action);
    this.busy = action;
    return id;
  }

  connect(): string {
    return this.sendAction("connect");
  }

  disconnect(): string {
    return this.sendAction("disconnect");
  }

  start(concept?: "direct" | "trajectory"): string {
    return this.sendAction("start", concept ? { concept } : {});
  }

  stop(): string {
    return this.sendAction("stop");
  }

  setConcept(concept: "direct" | "trajectory"): string {
    return this.sendAction("set_concept", { concept });
  }

  view(): PanelView {
    const vm = this.store.current;
    return {
      operatorState: vm.manager.operator_state,
      concept: vm.manager.concept,
      connectionText:
        vm.connection !== "open"
          ? `gateway ${vm.connection}`
          : vm.manager.connected
            ? "session up"
            : "no session",
      busyAction: this.busy,
      actionsEnabled: vm.connection === "open" && vm.role === "writer",
      lastError: vm.lastError?.detail ?? vm.manager.last_error,
    };
  }
}
