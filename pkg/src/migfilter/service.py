"""Live session server: drive a filtered plant over a WebSocket.

Each connection owns one session.  The client starts a trial, streams
held input updates at display rate, and receives state frames (at
~60 Hz, decimated from the 100 Hz control loop) plus a final metrics
frame.  The control loop reuses :class:`harness.TrialSession`, so a
server-side trial record is identical to an offline replay of the same
input stream.

Wire protocol (JSON text frames):
  client -> server:
    {"type": "start", "system": "cart_pendulum"|"slip",
     "mode": "training"|"assistance"|"off", "seed": uint,
     "duration_s": number}
    {"type": "input", "u": [numbers]}
    {"type": "stop"}
  server -> client:
    {"type": "state", "t": s, "x": [...], "verdict": "accepted"|"rejected"|
     "replaced"|"pass", "mig": number, "pra": number, "degraded": bool}
    {"type": "metrics", ...}
    {"type": "error", "detail": string}
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import logging
import math
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import config as cfgmod
from . import harness
from .config import ExperimentConfig
from .harness import VERDICT_CODES, VERDICT_NAMES, TrialSession

log = logging.getLogger("migfilter.service")

RENDER_RATE = 60.0  # Hz, frame decimation target


class Session:
    """One client connection: at most one active trial at a time."""

    def __init__(self, ws: WebSocket, record_dir: Path | None = None,
                 realtime: bool = True):
        self.ws = ws
        self.record_dir = record_dir
        self.realtime = realtime
        self.trial: TrialSession | None = None
        self.held_input: np.ndarray | None = None
        self.task: asyncio.Task | None = None
        self.trial_count = 0
        self.overruns = 0

    @property
    def running(self) -> bool:
        return self.task is not None and not self.task.done()

    async def handle(self, msg: dict):
        kind = msg.get("type")
        if kind == "start":
            await self.start(msg)
        elif kind == "input":
            await self.update_input(msg)
        elif kind == "stop":
            await self.stop()
        else:
            await self.error(f"unknown message type {kind!r}")

    async def start(self, msg: dict):
        if self.running:
            await self.error("trial already active")
            return
        try:
            cfg = ExperimentConfig(
                system=msg.get("system", "cart_pendulum"),
                user="human",
                mode=msg.get("mode", "training"),
                duration=float(msg.get("duration_s", 30.0)),
                seed=int(msg.get("seed", 0)),
                init_jitter=float(msg.get("init_jitter", 0.0)),
            )
        except (ValueError, KeyError, TypeError) as exc:
            await self.error(f"bad start message: {exc}")
            return
        plant = cfgmod.build_plant(cfg.system)
        obj = cfgmod.filter_objective(cfg)
        fcfg = cfgmod.build_filter_config(cfg)
        ctrl = cfgmod.build_controller(cfg, obj)
        x0 = np.array(plant.initial_state, dtype=float)
        if cfg.init_jitter > 0:
            rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed,
                                                               spawn_key=(1,)))
            x0 = x0 + rng.normal(0.0, cfg.init_jitter, plant.state_dim)
        self.trial = TrialSession(plant=plant, objective=obj, filter_cfg=fcfg,
                                  controller=ctrl, duration=cfg.duration,
                                  t_s=cfg.t_s, dt=cfg.dt, x0=x0, seed=cfg.seed,
                                  system=cfg.system, user_name="human",
                                  config_snapshot=dataclasses.asdict(cfg))
        self.held_input = np.zeros(plant.input_dim)
        self.overruns = 0
        self.task = asyncio.create_task(self._run())

    async def update_input(self, msg: dict):
        if self.trial is None:
            return  # inputs between trials are ignored
        u = msg.get("u")
        try:
            arr = np.asarray(u, dtype=float).reshape(-1)
        except (TypeError, ValueError):
            arr = None
        if arr is None or arr.shape[0] != self.trial.plant.input_dim \
                or not np.all(np.isfinite(arr)):
            await self.error("bad input vector")
            return
        self.held_input = self.trial.plant.saturate(arr)

    async def stop(self):
        if self.task is not None:
            self.task.cancel()
            try:
                await self.task
            except asyncio.CancelledError:
                pass
            self.task = None
        await self._finish()

    async def _run(self):
        trial = self.trial
        t_s = trial.t_s
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        render_acc = 0.0
        rejected = 0
        actions = 0
        try:
            while trial.active:
                tick_start = loop.time()
                u = self.held_input.copy()
                decision = trial.step(u)
                if np.linalg.norm(u) > harness.ACTION_EPS:
                    actions += 1
                    if decision.verdict in ("rejected", "replaced"):
                        rejected += 1
                elapsed = loop.time() - tick_start
                degraded = elapsed > t_s
                if degraded:
                    self.overruns += 1
                    log.warning("tick overran the %.0f ms deadline: %.1f ms",
                                t_s * 1e3, elapsed * 1e3)
                render_acc += t_s
                if render_acc >= 1.0 / RENDER_RATE or not trial.active:
                    render_acc -= 1.0 / RENDER_RATE
                    await self._send({
                        "type": "state",
                        "t": trial.t,
                        "x": [float(v) for v in trial.x],
                        "verdict": decision.verdict,
                        "mig": _json_float(decision.mig_integral),
                        "pra": (rejected / actions) if actions else 0.0,
                        "degraded": degraded,
                    })
                if self.realtime:
                    next_tick += t_s
                    await asyncio.sleep(max(0.0, next_tick - loop.time()))
                else:
                    await asyncio.sleep(0)
        except WebSocketDisconnect:
            raise
        except Exception:
            log.exception("trial loop failed")
            await self.error("internal trial failure")
        await self._finish()
        self.task = None

    async def _finish(self):
        if self.trial is None:
            return
        trial, self.trial = self.trial, None
        record = trial.finalize()
        if self.record_dir is not None:
            self.record_dir.mkdir(parents=True, exist_ok=True)
            name = f"session_{id(self) & 0xffff:04x}_trial_{self.trial_count:03d}.csv"
            harness.write_trial_csv(record, self.record_dir / name)
        self.trial_count += 1
        payload = {"type": "metrics", "overruns": self.overruns}
        for key, value in record.metrics.as_dict().items():
            payload[key] = _json_float(value) if isinstance(value, float) else value
        await self._send(payload)

    async def error(self, detail: str):
        await self._send({"type": "error", "detail": detail})

    async def _send(self, obj: dict):
        await self.ws.send_text(json.dumps(obj))


def _json_float(v: float):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    return float(v)


def create_app(record_dir: str | Path | None = None, realtime: bool = True) -> FastAPI:
    """ASGI app exposing the session protocol on /ws."""
    app = FastAPI(title="migfilter session server")
    app.state.record_dir = Path(record_dir) if record_dir else None
    app.state.realtime = realtime

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = Session(ws, record_dir=app.state.record_dir,
                          realtime=app.state.realtime)
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except ValueError as exc:
                    await session.error(f"malformed message: {exc}")
                    continue
                await session.handle(msg)
        except WebSocketDisconnect:
            pass
        finally:
            if session.task is not None:
                session.task.cancel()

    return app


def serve(host: str = "127.0.0.1", port: int = 8080,
          record_dir: str | Path | None = None) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    uvicorn.run(create_app(record_dir=record_dir), host=host, port=port,
                log_level="info")
