import { StateMessage } from "../src/protocol.js";

export function stateMsg(overrides: Partial<StateMessage> = {}): StateMessage {
  return {
    type: "state",
    sid: "s1",
    phase: "trial",
    reward: -0.5,
    task: "feeding",
    t: 42,
    human_q: Array.from({ length: 20 }, (_, i) => 0.01 * i - 0.05),
    robot_q: [0, 0.4, -0.8, 1.2, 0, -0.4, 0.2],
    tool_pose: { p: [0.3, 0.1, 0.8], q: [0, 0, 0, 1] },
    particles: [
      { p: [0.31, 0.1, 0.82], status: "held" },
      { p: [0.2, -0.1, 0.4], status: "free" },
    ],
    markers: [],
    scratch_count: 0,
    cumulative_reward: -12.345,
    force: 0.125,
    ...overrides,
  };
}

export function configJson(version = 1, sid = "s1"): string {
  return JSON.stringify({
    type: "config",
    sid,
    version,
    tasks: ["feeding", "drinking", "scratching", "bathing"],
    profiles: ["armA", "armB"],
    policies: ["feeding-fixed-s0"],
    episode_steps: 200,
    dt: 0.1,
  });
}

export class FakeTransport {
  sent: string[] = [];
  send(text: string): void {
    this.sent.push(text);
  }
  lastJson(): unknown {
    const last = this.sent[this.sent.length - 1];
    if (last === undefined) throw new Error("nothing sent");
    return JSON.parse(last);
  }
}
