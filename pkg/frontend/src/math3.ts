// Just enough 3D math for the scene camera and pose input. Quaternions are
// [x, y, z, w], matching the wire format.

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

// Weighted form so the endpoints are exact: alpha=1 must reproduce b bitwise
// (the display is required to sit on the latest server values when caught up).
export function lerp(a: Vec3, b: Vec3, alpha: number): Vec3 {
  const w = 1 - alpha;
  return [
    a[0] * w + b[0] * alpha,
    a[1] * w + b[1] * alpha,
    a[2] * w + b[2] * alpha,
  ];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) return [0, 0, 0, 1];
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const n = norm(axis);
  if (n === 0) return [0, 0, 0, 1];
  const s = Math.sin(angle / 2) / n;
  return quatNormalize([axis[0] * s, axis[1] * s, axis[2] * s, Math.cos(angle / 2)]);
}

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [ax, ay, az, aw] = a;
  const [bx, by, bz, bw] = b;
  return [
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
    aw * bw - ax * bx - ay * by - az * bz,
  ];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  // v' = v + 2 w (u x v) + 2 (u x (u x v)) with u the vector part
  const u: Vec3 = [q[0], q[1], q[2]];
  const t = scale(cross(u, v), 2);
  return add(add(v, scale(t, q[3])), cross(u, t));
}

// ZYX convention: yaw about z, then pitch about y, then roll about x.
export function quatFromRpy(roll: number, pitch: number, yaw: number): Quat {
  return quatMultiply(
    quatFromAxisAngle([0, 0, 1], yaw),
    quatMultiply(quatFromAxisAngle([0, 1, 0], pitch), quatFromAxisAngle([1, 0, 0], roll)),
  );
}
