"""FastAPI host for live sessions: a WebSocket endpoint speaking the session
protocol, a health route, and the static UI bundle at the root.

The simulation clock is authoritative: inbound messages are handled whenever
they arrive, but the environment only advances on tick boundaries scheduled
against the event-loop clock, so client message rate cannot change step count
or timing.
"""
from __future__ import annotations

import asyncio
import json
from pathlib import Path
from uuid import uuid4

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..configs import EnvConfig, load_env_config
from ..policy import Policy, load_policy
from .session import SessionDeps, create_session, handle_message, tick

FALLBACK_PAGE = """<!doctype html>
<html><head><title>caresim</title></head>
<body><h1>caresim live server</h1>
<p>No UI bundle found. The WebSocket endpoint is at <code>/session</code>;
health at <code>/health</code>.</p></body></html>
"""


class HealthResponse(BaseModel):
    status: str
    protocol_version: int
    policies: list[str]
    tick_interval: float


def load_policies_dir(path) -> dict[str, Policy]:
    policies: dict[str, Policy] = {}
    p = Path(path)
    if p.is_dir():
        for f in sorted(p.glob("*.json")):
            pol = load_policy(f)
            policies[pol.policy_id] = pol
    return policies


def create_app(policies: dict[str, Policy] | str | Path | None = None,
               record_dir=None, env_cfg: EnvConfig | None = None,
               tick_interval: float = 0.1, static_dir=None,
               stochastic: bool = False) -> FastAPI:
    """Build the server. `tick_interval` is wall-clock seconds per control
    step (0.1 in production; tests shrink it)."""
    if policies is None:
        policies = {}
    elif not isinstance(policies, dict):
        policies = load_policies_dir(policies)
    env_cfg = env_cfg if env_cfg is not None else load_env_config()
    if record_dir is not None:
        Path(record_dir).mkdir(parents=True, exist_ok=True)
    deps = SessionDeps(policies=policies, env_cfg=env_cfg,
                       record_dir=Path(record_dir) if record_dir else None,
                       stochastic=stochastic)

    app = FastAPI(title="caresim live server")
    app.state.deps = deps
    app.state.tick_interval = tick_interval

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", protocol_version=1,
                              policies=sorted(deps.policies),
                              tick_interval=app.state.tick_interval)

    @app.websocket("/session")
    async def session_ws(ws: WebSocket) -> None:
        await ws.accept()
        sid = ws.query_params.get("sid") or uuid4().hex
        seed = int(ws.query_params.get("seed", "0"))
        sess = create_session(sid, seed=seed)
        loop = asyncio.get_running_loop()
        next_tick = loop.time() + app.state.tick_interval
        try:
            while True:
                now = loop.time()
                if now >= next_tick:
                    if sess.phase in ("practice", "trial"):
                        for m in tick(sess, deps):
                            await ws.send_json(m)
                    next_tick += app.state.tick_interval
                    continue
                try:
                    text = await asyncio.wait_for(ws.receive_text(), timeout=next_tick - now)
                except asyncio.TimeoutError:
                    continue
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_json({"type": "error", "sid": sid, "error": "invalid JSON"})
                    continue
                for m in handle_message(sess, msg, deps):
                    await ws.send_json(m)
        except WebSocketDisconnect:
            return

    ui_dir = Path(static_dir) if static_dir else None
    if ui_dir and ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return FALLBACK_PAGE

    return app
