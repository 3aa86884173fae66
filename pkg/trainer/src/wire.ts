/**
 * Client for the simulator's framed TCP protocol: 4-byte big-endian length
 * prefix, UTF-8 JSON body, strictly one request in flight per connection.
 */

import * as net from "node:net";

export interface ObsReply {
  type: "obs";
  obs: number[][];
  info: Record<string, unknown>;
}

export interface TransitionReply {
  type: "transition";
  obs: number[][];
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

export interface ErrorReply {
  type: "error";
  kind: string;
  detail: string;
}

export type ServerReply = ObsReply | TransitionReply | ErrorReply;

export function encodeFrame(message: unknown): Buffer {
  const body = Buffer.from(JSON.stringify(message), "utf-8");
  const header = Buffer.alloc(4);
  header.writeUInt32BE(body.length, 0);
  return Buffer.concat([header, body]);
}

export class EnvConnection {
  private socket: net.Socket;
  private buffer = Buffer.alloc(0);
  private waiter: { resolve: (m: ServerReply) => void;
                    reject: (e: Error) => void } | null = null;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on("data", chunk => this.onData(chunk));
    socket.on("error", err => this.fail(err));
    socket.on("close", () => this.fail(new Error("connection closed")));
  }

  static connect(host: string, port: number, timeoutMs = 10_000): Promise<EnvConnection> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const timer = setTimeout(
        () => { socket.destroy(); reject(new Error("connect timeout")); },
        timeoutMs);
      socket.once("connect", () => {
        clearTimeout(timer);
        socket.setNoDelay(true);
        resolve(new EnvConnection(socket));
      });
      socket.once("error", err => { clearTimeout(timer); reject(err); });
    });
  }

  private onData(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    while (this.buffer.length >= 4) {
      const length = this.buffer.readUInt32BE(0);
      if (this.buffer.length < 4 + length) break;
      const body = this.buffer.subarray(4, 4 + length);
      this.buffer = this.buffer.subarray(4 + length);
      const message = JSON.parse(body.toString("utf-8")) as ServerReply;
      const waiter = this.waiter;
      this.waiter = null;
      waiter?.resolve(message);
    }
  }

  private fail(err: Error): void {
    const waiter = this.waiter;
    this.waiter = null;
    waiter?.reject(err);
  }

  private request(message: unknown): Promise<ServerReply> {
    if (this.waiter) {
      return Promise.reject(new Error("one request in flight per connection"));
    }
    return new Promise((resolve, reject) => {
      this.waiter = { resolve, reject };
      this.socket.write(encodeFrame(message));
    });
  }

  async reset(config: Record<string, unknown>): Promise<ObsReply> {
    const reply = await this.request({ type: "reset", config });
    if (reply.type !== "obs") {
      throw new Error(`reset failed: ${JSON.stringify(reply)}`);
    }
    return reply;
  }

  async step(action: number[]): Promise<TransitionReply> {
    const reply = await this.request({ type: "step", action });
    if (reply.type !== "transition") {
      throw new Error(`step failed: ${JSON.stringify(reply)}`);
    }
    return reply;
  }

  close(): void {
    try {
      this.socket.write(encodeFrame({ type: "close" }));
    } catch {
      // already closed
    }
    this.socket.removeAllListeners("close");
    this.socket.destroy();
  }
}
