// Orbiting camera over the scene (z up). Produces screen coordinates plus a
// depth used for painter's-order sorting, and the camera-plane basis used to
// map mouse drags onto world-space hand motion.

import { Vec3, add, cross, norm, scale, sub } from "./math3.js";

export interface Projected {
  x: number;
  y: number;
  depth: number;
  scale: number; // world meters to pixels at this depth
  visible: boolean;
}

export class OrbitCamera {
  yaw = -2.4; // radians around z
  pitch = 0.45; // radians above the horizon
  distance = 2.6; // meters from target
  target: Vec3 = [0.2, 0, 0.9];
  focal = 700; // pixels

  eye(): Vec3 {
    const cp = Math.cos(this.pitch);
    const offset: Vec3 = [
      this.distance * cp * Math.cos(this.yaw),
      this.distance * cp * Math.sin(this.yaw),
      this.distance * Math.sin(this.pitch),
    ];
    return add(this.target, offset);
  }

  // forward/right/up unit vectors of the camera frame
  basis(): { forward: Vec3; right: Vec3; up: Vec3 } {
    const eye = this.eye();
    const f = sub(this.target, eye);
    const forward = scale(f, 1 / norm(f));
    const rightRaw = cross(forward, [0, 0, 1]);
    const rn = norm(rightRaw);
    // looking straight down the z axis: pick any horizontal right vector
    const right: Vec3 = rn > 1e-9 ? scale(rightRaw, 1 / rn) : [0, 1, 0];
    const up = cross(right, forward);
    return { forward, right, up };
  }

  orbit(dxPixels: number, dyPixels: number): void {
    this.yaw -= dxPixels * 0.008;
    this.pitch = clamp(this.pitch + dyPixels * 0.008, -1.35, 1.35);
  }

  zoom(factor: number): void {
    this.distance = clamp(this.distance * factor, 0.5, 8);
  }

  project(p: Vec3, width: number, height: number): Projected {
    const { forward, right, up } = this.basis();
    const rel = sub(p, this.eye());
    const zc = dot3(rel, forward);
    if (zc <= 0.05) {
      return { x: 0, y: 0, depth: zc, scale: 0, visible: false };
    }
    const k = this.focal / zc;
    return {
      x: width / 2 + dot3(rel, right) * k,
      y: height / 2 - dot3(rel, up) * k,
      depth: zc,
      scale: k,
      visible: true,
    };
  }
}

function dot3(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}
