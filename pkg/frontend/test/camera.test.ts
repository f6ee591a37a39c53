import { describe, expect, it } from "vitest";

import { OrbitCamera } from "../src/camera.js";
import { dot, norm } from "../src/math3.js";

describe("OrbitCamera", () => {
  it("projects its target to the screen center", () => {
    const cam = new OrbitCamera();
    const p = cam.project(cam.target, 800, 600);
    expect(p.visible).toBe(true);
    expect(p.x).toBeCloseTo(400, 9);
    expect(p.y).toBeCloseTo(300, 9);
  });

  it("keeps an orthonormal basis through any orbit", () => {
    const cam = new OrbitCamera();
    for (const [dx, dy] of [[0, 0], [500, -300], [-1200, 900], [40, 4000]]) {
      cam.orbit(dx!, dy!);
      const { forward, right, up } = cam.basis();
      for (const v of [forward, right, up]) expect(norm(v)).toBeCloseTo(1, 12);
      expect(Math.abs(dot(forward, right))).toBeLessThan(1e-12);
      expect(Math.abs(dot(forward, up))).toBeLessThan(1e-12);
      expect(Math.abs(dot(right, up))).toBeLessThan(1e-12);
    }
  });

  it("culls points behind the eye", () => {
    const cam = new OrbitCamera();
    const { forward } = cam.basis();
    const behind: [number, number, number] = [
      cam.eye()[0] - forward[0],
      cam.eye()[1] - forward[1],
      cam.eye()[2] - forward[2],
    ];
    expect(cam.project(behind, 800, 600).visible).toBe(false);
  });

  it("clamps zoom and pitch", () => {
    const cam = new OrbitCamera();
    for (let i = 0; i < 100; i++) cam.zoom(0.5);
    expect(cam.distance).toBeGreaterThanOrEqual(0.5);
    for (let i = 0; i < 100; i++) cam.zoom(2);
    expect(cam.distance).toBeLessThanOrEqual(8);
    cam.orbit(0, 1e6);
    expect(Math.abs(cam.pitch)).toBeLessThanOrEqual(1.35);
  });
});
