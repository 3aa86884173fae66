/**
 * Framed-protocol client tests against an in-process loopback server.
 */

import * as net from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { EnvConnection, encodeFrame } from "../src/wire.js";

/** Minimal protocol twin: replies to reset/step with canned messages. */
class FakeServer {
  server: net.Server;
  port = 0;

  constructor() {
    this.server = net.createServer(socket => {
      let buffer = Buffer.alloc(0);
      socket.on("data", chunk => {
        buffer = Buffer.concat([buffer, chunk]);
        while (buffer.length >= 4) {
          const length = buffer.readUInt32BE(0);
          if (buffer.length < 4 + length) break;
          const body = JSON.parse(buffer.subarray(4, 4 + length).toString("utf-8"));
          buffer = buffer.subarray(4 + length);
          this.respond(socket, body);
        }
      });
    });
  }

  respond(socket: net.Socket, message: { type: string; action?: number[] }): void {
    if (message.type === "reset") {
      socket.write(encodeFrame({
        type: "obs", obs: [[0.25, -0.5]], info: { total_volume: 100 },
      }));
    } else if (message.type === "step") {
      socket.write(encodeFrame({
        type: "transition", obs: [[0.1, 0.2]],
        reward: (message.action?.[0] ?? 0) * 2, done: false,
        info: { echo: message.action },
      }));
    }
  }

  listen(): Promise<void> {
    return new Promise(resolve => {
      this.server.listen(0, "127.0.0.1", () => {
        this.port = (this.server.address() as net.AddressInfo).port;
        resolve();
      });
    });
  }

  close(): void {
    this.server.close();
  }
}

describe("frame encoding", () => {
  it("prefixes the UTF-8 body with its big-endian length", () => {
    const frame = encodeFrame({ type: "close" });
    expect(frame.readUInt32BE(0)).toBe(frame.length - 4);
    expect(JSON.parse(frame.subarray(4).toString("utf-8"))).toEqual(
      { type: "close" });
  });
});

describe("EnvConnection", () => {
  const server = new FakeServer();
  beforeAll(() => server.listen());
  afterAll(() => server.close());

  it("round-trips reset and step with exact float payloads", async () => {
    const conn = await EnvConnection.connect("127.0.0.1", server.port);
    const obs = await conn.reset({ task: { steps: 2 } });
    expect(obs.obs).toEqual([[0.25, -0.5]]);
    const t = await conn.step([0.125, 0, 0]);
    expect(t.reward).toBe(0.25);
    expect(t.info.echo).toEqual([0.125, 0, 0]);
    conn.close();
  });

  it("rejects overlapping requests on one connection", async () => {
    const conn = await EnvConnection.connect("127.0.0.1", server.port);
    const first = conn.reset({});
    await expect(conn.step([0, 0, 0])).rejects.toThrow(/one request/);
    await first;
    conn.close();
  });
});
