// Thin WebSocket client for the station gateway. The socket constructor is
// injectable so the same code runs in the browser and under node tests.

import { GatewayRecord, OutboundKind } from "./protocol.js";

type SocketLike = {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
};

export type SocketFactory = (url: string) => SocketLike;

const defaultFactory: SocketFactory = (url) => new (globalThis as any).WebSocket(url);

export class GatewayClient {
  private socket: SocketLike | null = null;
  private recordListeners: Array<(record: GatewayRecord) => void> = [];
  private stateListeners: Array<(state: "open" | "closed") => void> = [];
  private nextId = 1;

  constructor(
    readonly url: string,
    private readonly factory: SocketFactory = defaultFactory,
  ) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.factory(this.url);
      this.socket = socket;
      socket.onopen = () => {
        for (const listener of this.stateListeners) listener("open");
        resolve();
      };
      socket.onerror = (err) => reject(err instanceof Error ? err : new Error("gateway connect failed"));
      socket.onclose = () => {
        this.socket = null;
        for (const listener of this.stateListeners) listener("closed");
      };
      socket.onmessage = (event) => {
        let record: GatewayRecord;
        try {
          record = JSON.parse(String(event.data));
        } catch {
          return; // not a gateway record
        }
        for (const listener of this.recordListeners) listener(record);
      };
    });
  }

  get open(): boolean {
    return this.socket !== null;
  }

  onRecord(listener: (record: GatewayRecord) => void): void {
    this.recordListeners.push(listener);
  }

  onConnectionState(listener: (state: "open" | "closed") => void): void {
    this.stateListeners.push(listener);
  }

  send(kind: OutboundKind, payload: Record<string, unknown>, id?: string): string {
    if (this.socket === null) throw new Error("gateway is not connected");
    const messageId = id ?? `m${this.nextId++}`;
    this.socket.send(JSON.stringify({ kind, payload, id: messageId }));
    return messageId;
  }

  close(): void {
    this.socket?.close();
  }
}
