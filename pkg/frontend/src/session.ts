// Client side of the live-session protocol. The transport is injected (a real
// WebSocket in the browser, a stub in tests) and all simulation state lives on
// the server: this class only mirrors the latest messages, so two clients fed
// the same stream are indistinguishable.

import { PoseFrameMessage } from "./input.js";
import {
  ConfigMessage,
  PROTOCOL_VERSION,
  ResultMessage,
  StartOptions,
  StateMessage,
  parseServerMessage,
  validateResponses,
} from "./protocol.js";

export interface Transport {
  send(text: string): void;
}

// Last two state messages plus arrival times. The renderer may blend particle
// and tool positions between prev and cur for smoothness, but joint values are
// always drawn from cur: display interpolation never invents simulation state.
export interface SnapshotBuffer {
  prev: StateMessage | null;
  cur: StateMessage | null;
  prevAtMs: number;
  curAtMs: number;
}

const INPUT_PHASES = new Set(["lobby", "practice", "trial"]);

export class SessionClient {
  readonly sid: string;
  config: ConfigMessage | null = null;
  fatalError: string | null = null;
  lastError: string | null = null;
  phase = "lobby";
  result: ResultMessage | null = null;
  disconnected = false;
  statesReceived = 0;
  buffer: SnapshotBuffer = { prev: null, cur: null, prevAtMs: 0, curAtMs: 0 };

  private transport: Transport;

  constructor(sid: string, transport: Transport) {
    this.sid = sid;
    this.transport = transport;
  }

  hello(): void {
    this.transport.send(JSON.stringify({ type: "hello", sid: this.sid }));
  }

  start(opts: StartOptions): void {
    this.transport.send(JSON.stringify({ type: "start", sid: this.sid, ...opts }));
  }

  sendPose(msg: PoseFrameMessage): boolean {
    if (!this.canSendInput()) return false;
    this.transport.send(JSON.stringify(msg));
    return true;
  }

  // Validates locally before sending; returns an error string to show in the
  // form, or null when the answers went out.
  submitQuestionnaire(responses: Record<string, unknown>): string | null {
    const checked = validateResponses(responses);
    if (!checked.ok) return checked.error;
    this.transport.send(
      JSON.stringify({ type: "questionnaire", sid: this.sid, responses: checked.responses }),
    );
    return null;
  }

  stop(): void {
    this.transport.send(JSON.stringify({ type: "stop", sid: this.sid }));
  }

  canSendInput(): boolean {
    return !this.disconnected && this.fatalError === null && INPUT_PHASES.has(this.phase);
  }

  handleText(text: string, nowMs: number): void {
    const msg = parseServerMessage(text);
    if (msg === null) {
      this.lastError = "unparseable server message";
      return;
    }
    switch (msg.type) {
      case "config":
        if (msg.version !== PROTOCOL_VERSION) {
          this.fatalError =
            `protocol version mismatch: server speaks v${msg.version}, ` +
            `this UI speaks v${PROTOCOL_VERSION}`;
          return;
        }
        this.config = msg;
        return;
      case "state":
        this.buffer = {
          prev: this.buffer.cur,
          prevAtMs: this.buffer.curAtMs,
          cur: msg,
          curAtMs: nowMs,
        };
        this.phase = msg.phase;
        this.statesReceived += 1;
        return;
      case "result":
        this.phase = msg.phase;
        this.result = msg;
        return;
      case "error":
        this.lastError = msg.error;
        return;
    }
  }

  handleClose(): void {
    this.disconnected = true;
  }
}

// Blend factor between buffer.prev and buffer.cur for the current frame time,
// clamped to [0, 1]. With a single snapshot (or stalled stream) this is 1, so
// the display sits exactly on the latest server values.
export function interpolationAlpha(buffer: SnapshotBuffer, nowMs: number): number {
  if (buffer.prev === null || buffer.cur === null) return 1;
  const span = buffer.curAtMs - buffer.prevAtMs;
  if (span <= 0) return 1;
  const alpha = (nowMs - buffer.curAtMs) / span;
  return Math.min(1, Math.max(0, alpha));
}
