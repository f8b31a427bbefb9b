// Cross-language pin: every update type as encoded by the session server
// (fixtures generated by the backend's own protocol module) must decode and
// feed the store without loss.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { decodeUpdate, type StateFrame, type TaskCatalog }
  from "../src/protocol.js";
import { SessionStore } from "../src/store.js";

const here = dirname(fileURLToPath(import.meta.url));
const lines = readFileSync(join(here, "fixtures", "updates.ndjson"), "utf-8")
  .trim().split("\n");

describe("server-encoded updates", () => {
  it("decode without loss and in order", () => {
    for (const line of lines) {
      const msg = decodeUpdate(line);
      expect(JSON.parse(line)).toEqual(msg);
    }
  });

  it("drive the store through a whole session prelude", () => {
    const store = new SessionStore();
    store.track({ type: "set_weight", id: 3, term: "gait", value: 0 });
    for (const line of lines) {
      store.handle(decodeUpdate(line));
    }
    expect(store.connection).toBe("connected");
    expect(store.role).toBe("operator");
    const frame = store.latestFrame as StateFrame;
    expect(frame.segments.length).toBe(5); // biped: pelvis + four leg links
    expect(frame.goal).not.toBeNull();
    expect(frame.plan_trace).toBeInstanceOf(Array);
    expect(store.costHistory.length).toBe(1);
    expect(store.telemetryHistory.length).toBe(1);
    expect(Object.keys(store.weights)).toContain("gait");
    expect(Object.keys(store.params)).toContain("skip_deriv");
    expect(store.costspecVersion).toBe(1); // from the acked command
  });

  it("rejects a newer schema version in the handshake", () => {
    const hello = JSON.parse(lines[0]);
    hello.version = 99;
    expect(() => decodeUpdate(JSON.stringify(hello))).toThrow(/schema/);
  });
});
