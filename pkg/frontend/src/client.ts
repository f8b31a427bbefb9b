// WebSocket client: feeds server updates into the store and assigns command
// ids. A socket factory is injected so tests can substitute a fake wire.

import { encode, decodeUpdate, type Command } from "./protocol.js";
import type { SessionStore, UiEvent } from "./store.js";

// Omit that distributes over the Command union rather than collapsing it.
type DistributiveOmit<T, K extends keyof never> =
  T extends unknown ? Omit<T, K> : never;

export interface WireSocket {
  send(text: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: ((ev: unknown) => void) | null;
}

export type SocketFactory = (url: string) => WireSocket;

export class SessionClient {
  private socket: WireSocket | null = null;
  private nextId = 1;

  constructor(
    readonly store: SessionStore,
    readonly onEvent: (ev: UiEvent) => void,
    readonly socketFactory: SocketFactory =
      (url) => new WebSocket(url) as unknown as WireSocket,
  ) {}

  connect(url: string): void {
    const socket = this.socketFactory(url);
    this.socket = socket;
    this.store.connection = "connecting";
    socket.onopen = () => {
      // hello arrives as the first message; nothing to send
    };
    socket.onmessage = (ev) => {
      let update;
      try {
        update = decodeUpdate(ev.data);
      } catch {
        return; // ignore malformed frames, keep the connection
      }
      for (const event of this.store.handle(update)) {
        this.onEvent(event);
      }
    };
    socket.onclose = () => {
      this.store.connection = "closed";
      this.onEvent({ kind: "frame" });
    };
    socket.onerror = () => undefined;
  }

  send(cmd: DistributiveOmit<Command, "id">): number {
    if (!this.socket) throw new Error("not connected");
    const id = this.nextId++;
    const full = { ...cmd, id } as Command;
    this.store.track(full);
    this.socket.send(encode(full));
    return id;
  }

  setTarget(x: number, z: number): number {
    return this.send({ type: "set_target", x, z });
  }

  setWeight(term: string, value: number): number {
    return this.send({ type: "set_weight", term, value });
  }

  setParam(path: string, value: number): number {
    return this.send({ type: "set_param", path, value });
  }

  push(impulse: [number, number], body = 0): number {
    return this.send({ type: "push", impulse, body });
  }

  pause(): number { return this.send({ type: "pause" }); }
  resume(): number { return this.send({ type: "resume" }); }
  reset(): number { return this.send({ type: "reset" }); }
}
