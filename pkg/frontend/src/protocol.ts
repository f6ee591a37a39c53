// Wire protocol spoken with the live server over /session. This file is the
// single place the message schema appears; everything else imports from here.

export const PROTOCOL_VERSION = 1;

export interface WirePose {
  p: [number, number, number];
  q: [number, number, number, number]; // x, y, z, w
}

export interface ConfigMessage {
  type: "config";
  sid: string;
  version: number;
  tasks: string[];
  profiles: string[];
  policies: string[];
  episode_steps: number;
  dt: number;
}

export interface Particle {
  p: [number, number, number];
  status: "held" | "free" | "captured" | "spilled";
}

export interface Marker {
  p: [number, number, number];
  wiped: boolean;
}

export interface StateMessage {
  type: "state";
  sid: string;
  phase: string;
  reward: number;
  task: string;
  t: number;
  human_q: number[];
  robot_q: number[];
  tool_pose: WirePose;
  particles: Particle[];
  markers: Marker[];
  scratch_count: number;
  cumulative_reward: number;
  force: number;
}

export interface ResultMessage {
  type: "result";
  sid: string;
  phase: string;
  kind?: string;
  practice?: boolean;
  success?: boolean;
  cumulative_reward?: number;
}

export interface ErrorMessage {
  type: "error";
  sid: string;
  error: string;
}

export type ServerMessage = ConfigMessage | StateMessage | ResultMessage | ErrorMessage;

export interface StartOptions {
  task: string;
  policy_id: string;
  robot: string;
  practice: boolean;
  seed: number;
}

export const QUESTION_KEYS = ["L1", "L2", "L3", "L4"] as const;

export const QUESTION_TEXT: Record<string, string> = {
  L1: "The robot moved where I expected it to.",
  L2: "I felt in control of the avatar.",
  L3: "The task felt achievable.",
  L4: "I would use this assistance again.",
};

export function parseServerMessage(text: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const type = (obj as { type?: unknown }).type;
  if (type === "config" || type === "state" || type === "result" || type === "error") {
    return obj as ServerMessage;
  }
  return null;
}

// Responses must be integers on the 1..7 scale for exactly L1..L4; the server
// enforces the same rule, but rejecting locally keeps bad input out of the wire.
export function validateResponses(
  responses: Record<string, unknown>,
): { ok: true; responses: Record<string, number> } | { ok: false; error: string } {
  const out: Record<string, number> = {};
  for (const key of QUESTION_KEYS) {
    const v = responses[key];
    if (typeof v !== "number" || !Number.isInteger(v) || v < 1 || v > 7) {
      return { ok: false, error: `${key} must be an integer from 1 to 7` };
    }
    out[key] = v;
  }
  const extra = Object.keys(responses).filter(
    (k) => !(QUESTION_KEYS as readonly string[]).includes(k),
  );
  if (extra.length > 0) {
    return { ok: false, error: `unexpected response keys: ${extra.join(", ")}` };
  }
  return { ok: true, responses: out };
}
