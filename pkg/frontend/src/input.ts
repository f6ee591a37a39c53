// Operator input: maps mouse drags, head-rotation keys, and gamepad sticks
// onto the tracked-pose frame streamed to the server. Exactly one body target
// is active at a time; the others hold their last values, so every pose
// message carries a complete frame.

import { Vec3, add, quatFromRpy, quatNormalize, scale } from "./math3.js";
import { WirePose } from "./protocol.js";

export type InputMode = "mouse-drag-hand" | "keyboard-head" | "gamepad";
export type Target = "head" | "left-hand" | "right-hand";

export const TARGETS: readonly Target[] = ["head", "left-hand", "right-hand"];

export interface PoseFrameMessage {
  type: "pose";
  sid: string;
  t: number;
  head: WirePose;
  left: WirePose;
  right: WirePose;
}

interface CameraBasis {
  basis(): { forward: Vec3; right: Vec3; up: Vec3 };
}

const DEFAULT_HEAD: Vec3 = [0.1, 0.05, 1.25];
const DEFAULT_LEFT: Vec3 = [-0.3, 0.2, 0.9];
const DEFAULT_RIGHT: Vec3 = [0.3, 0.2, 0.9];

const GAMEPAD_DEADZONE = 0.15;
const GAMEPAD_SPEED = 0.5; // m/s at full stick deflection

export class InputMapping {
  mode: InputMode = "mouse-drag-hand";
  activeTarget: Target = "right-hand";
  metersPerPixel = 0.002;
  radiansPerKey = 0.05;

  head: Vec3 = [...DEFAULT_HEAD];
  left: Vec3 = [...DEFAULT_LEFT];
  right: Vec3 = [...DEFAULT_RIGHT];
  headRpy: [number, number, number] = [0, 0, 0];

  // set whenever the operator moved something since the last emitted frame
  dirty = false;

  reset(): void {
    this.head = [...DEFAULT_HEAD];
    this.left = [...DEFAULT_LEFT];
    this.right = [...DEFAULT_RIGHT];
    this.headRpy = [0, 0, 0];
    this.dirty = false;
  }

  setTarget(target: Target): void {
    this.activeTarget = target;
  }

  // Mouse drag in pixels, mapped onto the camera plane: +x right, +y down on
  // screen, so dy is negated against the camera up vector.
  dragBy(dxPixels: number, dyPixels: number, camera: CameraBasis): void {
    if (dxPixels === 0 && dyPixels === 0) return;
    const { right, up } = camera.basis();
    const dp = add(
      scale(right, dxPixels * this.metersPerPixel),
      scale(up, -dyPixels * this.metersPerPixel),
    );
    this.translate(dp);
  }

  // Head rotation from keyboard, one fixed increment per key press.
  turnHead(axis: "roll" | "pitch" | "yaw", direction: 1 | -1): void {
    const i = axis === "roll" ? 0 : axis === "pitch" ? 1 : 2;
    this.headRpy[i] += direction * this.radiansPerKey;
    this.dirty = true;
  }

  // Gamepad sticks: left stick moves in the camera plane, right stick's
  // vertical axis moves along world z. Axes inside the deadzone are ignored,
  // so a centered pad produces no frames.
  applyGamepad(axes: readonly number[], dtSeconds: number, camera: CameraBasis): void {
    const ax = deadzone(axes[0] ?? 0);
    const ay = deadzone(axes[1] ?? 0);
    const az = deadzone(axes[3] ?? 0);
    if (ax === 0 && ay === 0 && az === 0) return;
    const { right, up } = camera.basis();
    const step = GAMEPAD_SPEED * dtSeconds;
    let dp = add(scale(right, ax * step), scale(up, -ay * step));
    dp = add(dp, [0, 0, -az * step]);
    this.translate(dp);
  }

  private translate(dp: Vec3): void {
    if (this.activeTarget === "head") this.head = add(this.head, dp);
    else if (this.activeTarget === "left-hand") this.left = add(this.left, dp);
    else this.right = add(this.right, dp);
    this.dirty = true;
  }

  frame(sid: string, t: number): PoseFrameMessage {
    const headQ = quatNormalize(quatFromRpy(this.headRpy[0], this.headRpy[1], this.headRpy[2]));
    const identity: [number, number, number, number] = [0, 0, 0, 1];
    return {
      type: "pose",
      sid,
      t,
      head: { p: [...this.head], q: headQ },
      left: { p: [...this.left], q: identity },
      right: { p: [...this.right], q: [...identity] as [number, number, number, number] },
    };
  }
}

function deadzone(v: number): number {
  return Math.abs(v) < GAMEPAD_DEADZONE ? 0 : v;
}

// Rate-limits pose frames to at most `maxHz` and stamps them with strictly
// increasing timestamps (the server drops anything non-monotone). Quiet input
// produces no messages at all: the dirty flag gates every send.
export class PoseStreamer {
  private lastSentMs = -Infinity;
  private lastT = -Infinity;
  readonly minIntervalMs: number;

  constructor(maxHz = 30) {
    this.minIntervalMs = 1000 / maxHz;
  }

  poll(mapping: InputMapping, sid: string, nowMs: number): PoseFrameMessage | null {
    if (!mapping.dirty) return null;
    if (nowMs - this.lastSentMs < this.minIntervalMs) return null;
    let t = nowMs / 1000;
    if (t <= this.lastT) t = this.lastT + 1e-4;
    this.lastT = t;
    this.lastSentMs = nowMs;
    mapping.dirty = false;
    return mapping.frame(sid, t);
  }
}
