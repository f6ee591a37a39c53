// Scene rendering as a pure function: (previous state, current state, blend
// factor, camera) -> draw ops. Keeping this side-effect free makes "same
// stream in, same pixels out" directly testable without a canvas.
//
// The wire protocol carries joint values and object positions but no
// anthropometrics or robot link geometry, so the avatar is drawn with nominal
// display proportions and the robot as a tool-pose triad plus joint gauges.
// Only positions are blended between snapshots; joint values, statuses, and
// flags always come from the current snapshot.

import { OrbitCamera } from "./camera.js";
import {
  Quat,
  Vec3,
  add,
  lerp,
  quatFromAxisAngle,
  quatMultiply,
  quatRotate,
} from "./math3.js";
import { StateMessage } from "./protocol.js";

export type DrawOp =
  | { kind: "line"; a: [number, number]; b: [number, number]; width: number; color: string; depth: number }
  | { kind: "circle"; c: [number, number]; r: number; color: string; fill: boolean; depth: number }
  | { kind: "text"; p: [number, number]; text: string; color: string; size: number };

export const PARTICLE_COLORS: Record<string, string> = {
  held: "#ffd166",
  free: "#4cc9f0",
  captured: "#06d6a0",
  spilled: "#ef476f",
};

const MARKER_WIPED = "#06d6a0";
const MARKER_PENDING = "#f4a261";
const BODY = "#c8d0dc";
const TOOL_AXES = ["#ff5d5d", "#58d675", "#6f8dff"] as const;
const HUD = "#e8ecf2";

// Nominal display proportions (meters); the true values never cross the wire.
const AVATAR = {
  waistCenter: [0, 0, 0.55] as Vec3,
  torso: 0.55,
  shoulderHalf: 0.18,
  shoulderDrop: 0.05,
  upperArm: 0.3,
  forearm: 0.26,
  hand: 0.18,
  headRadius: 0.1,
};

const ROBOT_Q_DISPLAY_LIMIT = 2.9; // radians, gauge full scale

export interface RenderInputs {
  prev: StateMessage | null;
  cur: StateMessage;
  alpha: number; // 1 sits exactly on cur
  camera: OrbitCamera;
  width: number;
  height: number;
  episodeSteps: number;
}

export function renderScene(inp: RenderInputs): DrawOp[] {
  const { cur, camera, width, height } = inp;
  const prev = usablePrev(inp.prev, cur);
  const alpha = prev === null ? 1 : clamp01(inp.alpha);
  const scene: DrawOp[] = [];

  const project = (p: Vec3) => camera.project(p, width, height);
  const line = (a: Vec3, b: Vec3, color: string, w: number) => {
    const pa = project(a);
    const pb = project(b);
    if (!pa.visible || !pb.visible) return;
    scene.push({
      kind: "line",
      a: [pa.x, pa.y],
      b: [pb.x, pb.y],
      width: w,
      color,
      depth: (pa.depth + pb.depth) / 2,
    });
  };
  const circle = (p: Vec3, radiusM: number, color: string, fill: boolean) => {
    const pp = project(p);
    if (!pp.visible) return;
    scene.push({
      kind: "circle",
      c: [pp.x, pp.y],
      r: Math.max(1.5, radiusM * pp.scale),
      color,
      fill,
      depth: pp.depth,
    });
  };

  drawGround(line);
  drawAvatar(cur.human_q, line, circle);
  drawTool(cur, prev, alpha, line, circle);
  drawParticles(cur, prev, alpha, circle);
  drawMarkers(cur, prev, alpha, circle);

  scene.sort((a, b) => depthOf(b) - depthOf(a));
  return scene.concat(hudOps(inp), gaugeOps(cur.robot_q, height));
}

function usablePrev(prev: StateMessage | null, cur: StateMessage): StateMessage | null {
  // blending across trials or object-count changes would smear unrelated points
  if (prev === null || prev.task !== cur.task || prev.t >= cur.t) return null;
  if (prev.particles.length !== cur.particles.length) return null;
  if (prev.markers.length !== cur.markers.length) return null;
  return prev;
}

function depthOf(op: DrawOp): number {
  return op.kind === "text" ? -Infinity : op.depth;
}

type LineFn = (a: Vec3, b: Vec3, color: string, w: number) => void;
type CircleFn = (p: Vec3, radiusM: number, color: string, fill: boolean) => void;

function drawGround(line: LineFn): void {
  const ext = 0.8;
  for (let i = -2; i <= 2; i++) {
    const s = i * 0.4;
    line([-ext, s, 0], [ext, s, 0], "#2a3340", 1);
    line([s, -ext, 0], [s, ext, 0], "#2a3340", 1);
  }
}

// Mirrors the body model's frame layout: waist r/p/y (roll negated about x,
// then pitch, then yaw), head r/p/y on top of the torso, and 7-joint arms
// (shoulder y/x/z, elbow y, forearm z, wrist y/x) hanging from the shoulders.
function drawAvatar(humanQ: number[], line: LineFn, circle: CircleFn): void {
  const waist = humanQ.slice(0, 3);
  const head = humanQ.slice(3, 6);
  const rightArm = humanQ.slice(6, 13);
  const leftArm = humanQ.slice(13, 20);

  const torsoQ = quatMultiply(
    quatMultiply(
      quatFromAxisAngle([1, 0, 0], -(waist[0] ?? 0)),
      quatFromAxisAngle([0, 1, 0], waist[1] ?? 0),
    ),
    quatFromAxisAngle([0, 0, 1], waist[2] ?? 0),
  );
  const headQ = quatMultiply(torsoQ, rpyQuat(head));

  const base = AVATAR.waistCenter;
  const neck = add(base, quatRotate(torsoQ, [0, 0, AVATAR.torso]));
  line(base, neck, BODY, 5);
  circle(neck, AVATAR.headRadius, BODY, false);
  // gaze line so head orientation reads on screen
  line(neck, add(neck, quatRotate(headQ, [AVATAR.headRadius * 2, 0, 0])), "#ffd166", 2);

  for (const side of ["right", "left"] as const) {
    const sign = side === "right" ? -1 : 1;
    const shoulder = add(
      base,
      quatRotate(torsoQ, [0, sign * AVATAR.shoulderHalf, AVATAR.torso - AVATAR.shoulderDrop]),
    );
    const q = side === "right" ? rightArm : leftArm;
    const pts = armPoints(shoulder, torsoQ, q);
    line(neck, shoulder, BODY, 4);
    line(shoulder, pts.elbow, BODY, 4);
    line(pts.elbow, pts.wrist, BODY, 4);
    line(pts.wrist, pts.tip, BODY, 3);
    circle(pts.tip, 0.025, BODY, true);
  }
}

function rpyQuat(rpy: number[]): Quat {
  return quatMultiply(
    quatMultiply(
      quatFromAxisAngle([0, 0, 1], rpy[2] ?? 0),
      quatFromAxisAngle([0, 1, 0], rpy[1] ?? 0),
    ),
    quatFromAxisAngle([1, 0, 0], rpy[0] ?? 0),
  );
}

const ARM_AXES: readonly Vec3[] = [
  [0, 1, 0],
  [1, 0, 0],
  [0, 0, 1],
  [0, 1, 0],
  [0, 0, 1],
  [0, 1, 0],
  [1, 0, 0],
];
const ARM_OFFSETS: readonly (Vec3 | null)[] = [
  null,
  null,
  null,
  [0, 0, -AVATAR.upperArm],
  null,
  [0, 0, -AVATAR.forearm],
  null,
];

function armPoints(shoulder: Vec3, baseQ: Quat, q: number[]): { elbow: Vec3; wrist: Vec3; tip: Vec3 } {
  let p = shoulder;
  let rot = baseQ;
  let elbow = shoulder;
  let wrist = shoulder;
  for (let i = 0; i < 7; i++) {
    const off = ARM_OFFSETS[i];
    if (off !== null && off !== undefined) p = add(p, quatRotate(rot, off));
    if (i === 3) elbow = p;
    if (i === 5) wrist = p;
    rot = quatMultiply(rot, quatFromAxisAngle(ARM_AXES[i] as Vec3, q[i] ?? 0));
  }
  const tip = add(p, quatRotate(rot, [0, 0, -AVATAR.hand]));
  return { elbow, wrist, tip };
}

function drawTool(
  cur: StateMessage,
  prev: StateMessage | null,
  alpha: number,
  line: LineFn,
  circle: CircleFn,
): void {
  const p = prev === null ? cur.tool_pose.p : lerp(prev.tool_pose.p, cur.tool_pose.p, alpha);
  const q = cur.tool_pose.q; // orientation snaps to the latest value
  const axes: Vec3[] = [
    [0.08, 0, 0],
    [0, 0.08, 0],
    [0, 0, 0.08],
  ];
  axes.forEach((axis, i) => {
    line(p, add(p, quatRotate(q, axis)), TOOL_AXES[i] ?? "#fff", 2);
  });
  circle(p, 0.02, "#e8ecf2", true);
}

function drawParticles(
  cur: StateMessage,
  prev: StateMessage | null,
  alpha: number,
  circle: CircleFn,
): void {
  cur.particles.forEach((pt, i) => {
    const from = prev?.particles[i];
    const p = from === undefined ? pt.p : lerp(from.p, pt.p, alpha);
    circle(p, 0.012, PARTICLE_COLORS[pt.status] ?? "#ffffff", true);
  });
}

function drawMarkers(
  cur: StateMessage,
  prev: StateMessage | null,
  alpha: number,
  circle: CircleFn,
): void {
  cur.markers.forEach((mk, i) => {
    const from = prev?.markers[i];
    const p = from === undefined ? mk.p : lerp(from.p, mk.p, alpha);
    circle(p, 0.02, mk.wiped ? MARKER_WIPED : MARKER_PENDING, mk.wiped);
  });
}

function hudOps(inp: RenderInputs): DrawOp[] {
  const s = inp.cur;
  const rows = [
    `${s.task}  ·  ${s.phase}`,
    `t ${s.t}/${inp.episodeSteps}`,
    `reward ${s.cumulative_reward.toFixed(2)}`,
    `force ${s.force.toFixed(3)}`,
  ];
  if (s.task === "scratching") rows.push(`scratches ${s.scratch_count}`);
  return rows.map((text, i) => ({
    kind: "text" as const,
    p: [14, 22 + i * 18] as [number, number],
    text,
    color: HUD,
    size: 13,
  }));
}

// Screen-space joint gauges for the arm; the wire carries joint values only,
// so this is the faithful way to show the full robot configuration.
function gaugeOps(robotQ: number[], height: number): DrawOp[] {
  const ops: DrawOp[] = [];
  const x0 = 14;
  const w = 90;
  robotQ.forEach((q, i) => {
    const y = height - 14 - (robotQ.length - 1 - i) * 12;
    const frac = Math.max(-1, Math.min(1, q / ROBOT_Q_DISPLAY_LIMIT));
    ops.push({
      kind: "line",
      a: [x0, y],
      b: [x0 + w, y],
      width: 1,
      color: "#3a4454",
      depth: -Infinity,
    });
    ops.push({
      kind: "line",
      a: [x0 + w / 2, y],
      b: [x0 + w / 2 + (frac * w) / 2, y],
      width: 4,
      color: "#6f8dff",
      depth: -Infinity,
    });
  });
  return ops;
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

export function drawToCanvas(
  ctx: CanvasRenderingContext2D,
  ops: DrawOp[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  for (const op of ops) {
    if (op.kind === "line") {
      ctx.strokeStyle = op.color;
      ctx.lineWidth = op.width;
      ctx.beginPath();
      ctx.moveTo(op.a[0], op.a[1]);
      ctx.lineTo(op.b[0], op.b[1]);
      ctx.stroke();
    } else if (op.kind === "circle") {
      ctx.beginPath();
      ctx.arc(op.c[0], op.c[1], op.r, 0, Math.PI * 2);
      if (op.fill) {
        ctx.fillStyle = op.color;
        ctx.fill();
      } else {
        ctx.strokeStyle = op.color;
        ctx.lineWidth = 1.5;
        ctx.stroke();
      }
    } else {
      ctx.fillStyle = op.color;
      ctx.font = `${op.size}px ui-monospace, monospace`;
      ctx.fillText(op.text, op.p[0], op.p[1]);
    }
  }
}
