// Browser entry point: owns the WebSocket, the DOM, and the frame loop.
// Everything testable lives in the imported modules; this file is wiring.

import { OrbitCamera } from "./camera.js";
import { InputMapping, PoseStreamer, Target, TARGETS } from "./input.js";
import { QUESTION_KEYS, QUESTION_TEXT } from "./protocol.js";
import { drawToCanvas, renderScene } from "./render.js";
import { SessionClient, interpolationAlpha } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("scene");
const maybeCtx = canvas.getContext("2d");
if (maybeCtx === null) throw new Error("canvas 2d context unavailable");
const ctx: CanvasRenderingContext2D = maybeCtx;

const params = new URLSearchParams(location.search);
const sid = params.get("sid") ?? `op-${Math.random().toString(36).slice(2, 10)}`;
const seed = params.get("seed") ?? "0";

const wsProto = location.protocol === "https:" ? "wss" : "ws";
const ws = new WebSocket(`${wsProto}://${location.host}/session?sid=${sid}&seed=${seed}`);
const client = new SessionClient(sid, { send: (text) => ws.send(text) });

const camera = new OrbitCamera();
const mapping = new InputMapping();
const streamer = new PoseStreamer(30);

ws.onopen = () => client.hello();
ws.onmessage = (ev) => {
  client.handleText(String(ev.data), performance.now());
  syncPanels();
};
ws.onclose = () => {
  client.handleClose();
  syncPanels();
};

// ---- scene canvas input ---------------------------------------------------

let dragging: "target" | "orbit" | null = null;
let lastX = 0;
let lastY = 0;

canvas.addEventListener("mousedown", (ev) => {
  dragging = ev.button === 2 || ev.shiftKey ? "orbit" : "target";
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener("mouseup", () => {
  dragging = null;
});
window.addEventListener("mousemove", (ev) => {
  if (dragging === null) return;
  const dx = ev.clientX - lastX;
  const dy = ev.clientY - lastY;
  lastX = ev.clientX;
  lastY = ev.clientY;
  if (dragging === "orbit") camera.orbit(dx, dy);
  else if (client.canSendInput()) mapping.dragBy(dx, dy, camera);
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  camera.zoom(ev.deltaY > 0 ? 1.1 : 1 / 1.1);
});
canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());

const HEAD_KEYS: Record<string, ["roll" | "pitch" | "yaw", 1 | -1]> = {
  ArrowLeft: ["yaw", 1],
  ArrowRight: ["yaw", -1],
  ArrowUp: ["pitch", -1],
  ArrowDown: ["pitch", 1],
  q: ["roll", -1],
  e: ["roll", 1],
};

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) return;
  const idx = ["1", "2", "3"].indexOf(ev.key);
  if (idx >= 0) {
    setTarget(TARGETS[idx] as Target);
    return;
  }
  const turn = HEAD_KEYS[ev.key];
  if (turn !== undefined && client.canSendInput()) {
    mapping.mode = "keyboard-head";
    mapping.turnHead(turn[0], turn[1]);
    ev.preventDefault();
  }
});

function setTarget(target: Target): void {
  mapping.setTarget(target);
  for (const t of TARGETS) {
    el<HTMLButtonElement>(`target-${t}`).classList.toggle("active", t === target);
  }
}
for (const t of TARGETS) {
  el<HTMLButtonElement>(`target-${t}`).addEventListener("click", () => setTarget(t));
}
setTarget(mapping.activeTarget);

// ---- session controls -----------------------------------------------------

const taskSel = el<HTMLSelectElement>("task-select");
const policySel = el<HTMLSelectElement>("policy-select");
const robotSel = el<HTMLSelectElement>("robot-select");
const seedInput = el<HTMLInputElement>("seed-input");
seedInput.value = seed;

function fillSelect(sel: HTMLSelectElement, values: string[]): void {
  sel.innerHTML = "";
  for (const v of values) {
    const opt = document.createElement("option");
    opt.value = v;
    opt.textContent = v;
    sel.appendChild(opt);
  }
}

function startTrial(practice: boolean): void {
  client.start({
    task: taskSel.value,
    policy_id: policySel.value,
    robot: robotSel.value,
    practice,
    seed: Number(seedInput.value) || 0,
  });
}

el<HTMLButtonElement>("btn-practice").addEventListener("click", () => startTrial(true));
el<HTMLButtonElement>("btn-trial").addEventListener("click", () => startTrial(false));
el<HTMLButtonElement>("btn-stop").addEventListener("click", () => client.stop());

// ---- questionnaire ---------------------------------------------------------

const qForm = el<HTMLFormElement>("questionnaire");
const qRows = el<HTMLDivElement>("q-rows");
for (const key of QUESTION_KEYS) {
  const row = document.createElement("div");
  row.className = "q-row";
  const label = document.createElement("div");
  label.textContent = `${key}. ${QUESTION_TEXT[key]}`;
  row.appendChild(label);
  const scale = document.createElement("div");
  scale.className = "q-scale";
  for (let v = 1; v <= 7; v++) {
    const lab = document.createElement("label");
    const radio = document.createElement("input");
    radio.type = "radio";
    radio.name = key;
    radio.value = String(v);
    lab.appendChild(radio);
    lab.appendChild(document.createTextNode(String(v)));
    scale.appendChild(lab);
  }
  row.appendChild(scale);
  qRows.appendChild(row);
}

qForm.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const responses: Record<string, unknown> = {};
  for (const key of QUESTION_KEYS) {
    const picked = qForm.querySelector<HTMLInputElement>(`input[name="${key}"]:checked`);
    if (picked !== null) responses[key] = Number(picked.value);
  }
  const err = client.submitQuestionnaire(responses);
  el<HTMLDivElement>("q-error").textContent = err ?? "";
});

// ---- WebXR (optional; shown only when the platform supports it) ------------

const xr = (navigator as { xr?: { isSessionSupported(mode: string): Promise<boolean> } }).xr;
if (xr !== undefined) {
  xr.isSessionSupported("immersive-vr").then((ok) => {
    if (ok) el<HTMLDivElement>("xr-row").classList.remove("hidden");
  }).catch(() => undefined);
}

// ---- DOM state sync ---------------------------------------------------------

function syncPanels(): void {
  if (client.fatalError !== null) {
    el<HTMLDivElement>("fatal-text").textContent = client.fatalError;
    el<HTMLDivElement>("fatal-overlay").classList.remove("hidden");
  }
  el<HTMLDivElement>("conn-banner").classList.toggle("hidden", !client.disconnected);
  const toast = el<HTMLDivElement>("error-toast");
  toast.textContent = client.lastError ?? "";
  toast.classList.toggle("hidden", client.lastError === null);

  if (client.config !== null && taskSel.options.length === 0) {
    fillSelect(taskSel, client.config.tasks);
    fillSelect(policySel, client.config.policies);
    fillSelect(robotSel, client.config.profiles);
  }
  el<HTMLDivElement>("phase-label").textContent = client.phase;
  qForm.classList.toggle("hidden", client.phase !== "questionnaire");
  el<HTMLDivElement>("done-screen").classList.toggle(
    "hidden",
    !(client.phase === "done" && client.result !== null),
  );
  if (client.result?.success !== undefined) {
    el<HTMLDivElement>("result-label").textContent =
      `${client.result.practice ? "practice" : "trial"} ` +
      `${client.result.success ? "succeeded" : "ended"}, ` +
      `reward ${client.result.cumulative_reward?.toFixed(2) ?? "?"}`;
  }
}

// ---- frame loop -------------------------------------------------------------

function resize(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
}
window.addEventListener("resize", resize);
resize();

let lastFrameMs = performance.now();

function frame(nowMs: number): void {
  const dt = Math.min(0.1, (nowMs - lastFrameMs) / 1000);
  lastFrameMs = nowMs;

  const pads = typeof navigator.getGamepads === "function" ? navigator.getGamepads() : [];
  const pad = pads.find((p) => p !== null);
  if (pad !== undefined && pad !== null && client.canSendInput()) {
    mapping.mode = "gamepad";
    mapping.applyGamepad(pad.axes, dt, camera);
  }

  const poseMsg = streamer.poll(mapping, sid, nowMs);
  if (poseMsg !== null && ws.readyState === WebSocket.OPEN) {
    client.sendPose(poseMsg);
  }

  const cur = client.buffer.cur;
  if (cur !== null) {
    const ops = renderScene({
      prev: client.buffer.prev,
      cur,
      alpha: interpolationAlpha(client.buffer, nowMs),
      camera,
      width: canvas.width,
      height: canvas.height,
      episodeSteps: client.config?.episode_steps ?? 200,
    });
    drawToCanvas(ctx, ops, canvas.width, canvas.height);
  } else {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#5a6676";
    ctx.font = "14px ui-monospace, monospace";
    ctx.fillText("waiting for session…", 14, 24);
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
