/**
 * Session client: one WebSocket, auto-reconnect, typed callbacks.
 */

import {
  decodeServerMsg,
  encodeInput,
  encodeStart,
  encodeStop,
  FilterMode,
  ServerMsg,
  SystemName,
} from "./protocol.js";

export interface ClientEvents {
  onMessage: (msg: ServerMsg) => void;
  onConnection: (connected: boolean) => void;
}

export class SessionClient {
  private ws: WebSocket | null = null;
  private url: string;
  private events: ClientEvents;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(url: string, events: ClientEvents) {
    this.url = url;
    this.events = events;
  }

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => this.events.onConnection(true);
    this.ws.onmessage = (ev) => {
      const msg = decodeServerMsg(String(ev.data));
      if (msg) this.events.onMessage(msg);
    };
    this.ws.onclose = () => {
      this.events.onConnection(false);
      this.ws = null;
      if (!this.closed) {
        this.reconnectTimer = setTimeout(() => this.open(), 1000);
      }
    };
    this.ws.onerror = () => this.ws?.close();
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer) clearTimeout(this.reconnectTimer);
    this.ws?.close();
  }

  get ready(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  start(system: SystemName, mode: FilterMode, seed: number, durationS: number): void {
    this.send(encodeStart(system, mode, seed, durationS));
  }

  sendInput(u: number[]): void {
    this.send(encodeInput(u));
  }

  stop(): void {
    this.send(encodeStop());
  }

  private send(text: string): void {
    if (this.ready) this.ws!.send(text);
  }
}
