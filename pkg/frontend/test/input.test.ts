import { describe, expect, it } from "vitest";

import { OrbitCamera } from "../src/camera.js";
import { InputMapping, PoseStreamer } from "../src/input.js";
import { Vec3, dot, norm, sub } from "../src/math3.js";

// axis-aligned camera: screen x -> world +y, screen up -> world +z
const flatCam = {
  basis: () => ({
    forward: [1, 0, 0] as Vec3,
    right: [0, 1, 0] as Vec3,
    up: [0, 0, 1] as Vec3,
  }),
};

describe("InputMapping", () => {
  it("maps a 100 px drag to 0.2 m in the camera plane", () => {
    const m = new InputMapping();
    const before: Vec3 = [...m.right];
    m.dragBy(100, 0, flatCam);
    expect(m.right[1] - before[1]).toBeCloseTo(0.2, 12);
    expect(m.right[0]).toBe(before[0]);
    expect(m.right[2]).toBe(before[2]);
    expect(m.dirty).toBe(true);
  });

  it("screen-down drags move the target down", () => {
    const m = new InputMapping();
    const z0 = m.right[2];
    m.dragBy(0, 100, flatCam);
    expect(m.right[2] - z0).toBeCloseTo(-0.2, 12);
  });

  it("drag displacement stays in the camera plane for any orbit", () => {
    const cam = new OrbitCamera();
    cam.orbit(137, -42);
    const m = new InputMapping();
    const before: Vec3 = [...m.right];
    m.dragBy(60, -80, cam);
    const dp = sub(m.right, before);
    expect(norm(dp)).toBeCloseTo(Math.hypot(60, 80) * 0.002, 9);
    expect(Math.abs(dot(dp, cam.basis().forward))).toBeLessThan(1e-12);
  });

  it("moves only the active target", () => {
    const m = new InputMapping();
    m.setTarget("head");
    const left: Vec3 = [...m.left];
    const right: Vec3 = [...m.right];
    m.dragBy(50, 50, flatCam);
    expect(m.left).toEqual(left);
    expect(m.right).toEqual(right);
    expect(m.head).not.toEqual([0.1, 0.05, 1.25]);
  });

  it("turns the head by a fixed increment per key", () => {
    const m = new InputMapping();
    m.turnHead("yaw", 1);
    m.turnHead("yaw", 1);
    m.turnHead("pitch", -1);
    expect(m.headRpy[2]).toBeCloseTo(2 * m.radiansPerKey, 12);
    expect(m.headRpy[1]).toBeCloseTo(-m.radiansPerKey, 12);
    expect(m.dirty).toBe(true);
  });

  it("emits unit quaternions after arbitrary input", () => {
    const m = new InputMapping();
    for (let i = 0; i < 50; i++) {
      m.turnHead(i % 2 === 0 ? "yaw" : "roll", i % 3 === 0 ? -1 : 1);
      m.dragBy(i * 3 - 40, 17 - i, flatCam);
    }
    const frame = m.frame("s1", 1.0);
    for (const q of [frame.head.q, frame.left.q, frame.right.q]) {
      expect(Math.abs(Math.hypot(...q) - 1)).toBeLessThan(1e-6);
    }
  });

  it("ignores gamepad axes inside the deadzone", () => {
    const m = new InputMapping();
    m.applyGamepad([0.1, -0.05, 0, 0.14], 0.1, flatCam);
    expect(m.dirty).toBe(false);
  });

  it("integrates gamepad deflection over time", () => {
    const m = new InputMapping();
    const y0 = m.right[1];
    m.applyGamepad([1, 0, 0, 0], 0.1, flatCam);
    expect(m.right[1] - y0).toBeCloseTo(0.05, 12);
    expect(m.dirty).toBe(true);
  });

  it("frames carry the complete pose triple", () => {
    const m = new InputMapping();
    const f = m.frame("abc", 2.5);
    expect(f.type).toBe("pose");
    expect(f.sid).toBe("abc");
    expect(f.t).toBe(2.5);
    for (const pose of [f.head, f.left, f.right]) {
      expect(pose.p).toHaveLength(3);
      expect(pose.q).toHaveLength(4);
    }
  });
});

describe("PoseStreamer", () => {
  it("emits nothing without input", () => {
    const m = new InputMapping();
    const s = new PoseStreamer();
    for (let ms = 0; ms < 2000; ms += 5) {
      expect(s.poll(m, "s1", ms)).toBeNull();
    }
  });

  it("clears the dirty flag on send and stays quiet after", () => {
    const m = new InputMapping();
    const s = new PoseStreamer();
    m.dragBy(10, 0, flatCam);
    expect(s.poll(m, "s1", 100)).not.toBeNull();
    expect(m.dirty).toBe(false);
    expect(s.poll(m, "s1", 200)).toBeNull();
  });

  it("caps the stream at 30 Hz under continuous input", () => {
    const m = new InputMapping();
    const s = new PoseStreamer(30);
    let sent = 0;
    for (let ms = 0; ms < 1000; ms++) {
      m.dirty = true;
      if (s.poll(m, "s1", ms) !== null) sent++;
    }
    expect(sent).toBeLessThanOrEqual(30);
    expect(sent).toBeGreaterThanOrEqual(28);
  });

  it("timestamps are strictly increasing even when the clock stalls", () => {
    const m = new InputMapping();
    const s = new PoseStreamer(Infinity); // throttle out of the way
    const ts: number[] = [];
    for (const nowMs of [50, 50, 50, 60, 60, 60]) {
      m.dirty = true;
      const msg = s.poll(m, "s1", nowMs);
      if (msg !== null) ts.push(msg.t);
    }
    expect(ts).toHaveLength(6);
    for (let i = 1; i < ts.length; i++) {
      expect(ts[i]!).toBeGreaterThan(ts[i - 1]!);
    }
  });
});
