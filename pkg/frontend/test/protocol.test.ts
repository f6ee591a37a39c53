import { describe, expect, it } from "vitest";

import {
  PROTOCOL_VERSION,
  QUESTION_KEYS,
  parseServerMessage,
  validateResponses,
} from "../src/protocol.js";
import { configJson, stateMsg } from "./helpers.js";

describe("parseServerMessage", () => {
  it("parses every server message type", () => {
    const config = parseServerMessage(configJson());
    expect(config?.type).toBe("config");

    const state = parseServerMessage(JSON.stringify(stateMsg()));
    expect(state?.type).toBe("state");
    if (state?.type === "state") {
      expect(state.t).toBe(42);
      expect(state.particles).toHaveLength(2);
    }

    const result = parseServerMessage(
      JSON.stringify({ type: "result", sid: "s1", phase: "questionnaire", success: true }),
    );
    expect(result?.type).toBe("result");

    const error = parseServerMessage(
      JSON.stringify({ type: "error", sid: "s1", error: "unknown task" }),
    );
    expect(error?.type).toBe("error");
  });

  it("rejects junk without throwing", () => {
    expect(parseServerMessage("{not json")).toBeNull();
    expect(parseServerMessage("42")).toBeNull();
    expect(parseServerMessage("null")).toBeNull();
    expect(parseServerMessage(JSON.stringify({ sid: "s1" }))).toBeNull();
    expect(parseServerMessage(JSON.stringify({ type: "telemetry" }))).toBeNull();
  });

  it("pins the protocol version this UI speaks", () => {
    expect(PROTOCOL_VERSION).toBe(1);
  });
});

describe("validateResponses", () => {
  const good = { L1: 1, L2: 7, L3: 4, L4: 3 };

  it("accepts integers on the 1..7 scale for all four items", () => {
    const out = validateResponses(good);
    expect(out.ok).toBe(true);
    if (out.ok) expect(out.responses).toEqual(good);
  });

  it("rejects out-of-scale, fractional, and non-numeric values", () => {
    for (const bad of [0, 8, -1, 3.5, "3", null, undefined, NaN]) {
      const out = validateResponses({ ...good, L2: bad });
      expect(out.ok).toBe(false);
    }
  });

  it("rejects missing and extra keys", () => {
    const partial: Record<string, unknown> = { L1: 2, L2: 2, L3: 2 };
    expect(validateResponses(partial).ok).toBe(false);
    expect(validateResponses({ ...good, L5: 4 }).ok).toBe(false);
  });

  it("covers exactly the four questionnaire items", () => {
    expect([...QUESTION_KEYS]).toEqual(["L1", "L2", "L3", "L4"]);
  });
});
