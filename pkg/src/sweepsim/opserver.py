"""Operator gateway: live supervised runs behind a JSON-frame WebSocket.

The engine steps in a background thread at a configurable pace; every
connected console receives identical frames (state snapshots, heatmap
deltas, events, phase proposals). Operator commands arrive as JSON frames,
are queued into the engine, and are acknowledged per command id once the
engine applies them at a tick boundary. Protocol reference: docs/protocol.md.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from pathlib import Path

import numpy as np

from . import config as cfg
from .engine import SimRun
from .world import Scenario

PROTOCOL_VERSION = 1

COMMAND_TYPES = ("approve_phase", "retask", "confirm_candidate",
                 "dismiss_candidate", "pause", "resume", "abort")
EVENT_FRAME_KINDS = ("phase", "candidate_new", "candidate_status",
                     "task_assign", "robot_fail", "recharge", "operator",
                     "election", "end")


class Gateway:
    """Fans engine state out to consoles and feeds commands back in."""

    def __init__(self, scenario: Scenario, *, mode=None, max_ticks=50000,
                 pace: float = 10.0, supervised: bool = True):
        mission = cfg.with_overrides(cfg.MissionConfig(), supervised=supervised)
        self.sim = SimRun(scenario, max_ticks=max_ticks, mode=mode,
                          mission_cfg=mission)
        self.sim.frame_hook = self._on_event
        self.pace = pace
        self.seq = 0
        self.clients: dict[int, asyncio.Queue] = {}
        self._next_client = 0
        self._pending: dict[int, tuple[int, object]] = {}  # engine cmd -> (client, their id)
        self._lock = threading.Lock()
        self.loop: asyncio.AbstractEventLoop | None = None
        self._event_buffer: list[dict] = []
        self._prev_posterior = self.sim.coordinators[0].heatmap.posterior().copy()
        self._last_proposal = None
        self.thread: threading.Thread | None = None

    # -- engine side -------------------------------------------------------

    def _on_event(self, record: dict) -> None:
        if record.get("kind") in EVENT_FRAME_KINDS:
            self._event_buffer.append(record)

    def _next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def engine_loop(self) -> None:
        sim = self.sim
        self._broadcast(self._snapshot_frame(full_heatmap=False))
        while not sim.finished:
            with self._lock:
                sim.poll_commands()
                self._flush_results()
            if sim.paused and not sim.aborted:
                self._flush_frames()
                time.sleep(0.05)
                continue
            with self._lock:
                sim.step()
                self._flush_results()
            self._flush_frames()
            if self.pace > 0:
                time.sleep(1.0 / self.pace)
        self._flush_frames()
        self._broadcast({"type": "bye", "seq": self._next_seq(),
                         "reason": "finished",
                         "completed": sim.completed})

    def _flush_results(self) -> None:
        results, self.sim.command_results = self.sim.command_results, []
        for res in results:
            target = self._pending.pop(res["cmd_id"], None)
            if target is None:
                continue
            client, their_id = target
            frame = ({"type": "ack", "seq": self._next_seq(), "cmd_id": their_id}
                     if res["ok"] else
                     {"type": "error", "seq": self._next_seq(),
                      "cmd_id": their_id, "code": "invalid_command",
                      "message": res["error"]})
            self._send_to(client, frame)

    def _flush_frames(self) -> None:
        events, self._event_buffer = self._event_buffer, []
        for record in events:
            self._broadcast({"type": "event", "seq": self._next_seq(),
                             "tick": record.get("t", 0), "event": record})
        coord = self.sim.coordinators[0]
        post = coord.heatmap.posterior()
        changed = np.flatnonzero(np.abs(post - self._prev_posterior) > 5e-5)
        if changed.size:
            self._broadcast({
                "type": "heatmap_delta", "seq": self._next_seq(),
                "tick": self.sim.tick,
                "cells": [[int(c), round(float(post[c]), 4)] for c in changed]})
            self._prev_posterior = post.copy()
        if coord.proposal != self._last_proposal:
            self._last_proposal = coord.proposal
            if coord.proposal is not None:
                self._broadcast({"type": "phase_proposal",
                                 "seq": self._next_seq(),
                                 "tick": self.sim.tick,
                                 "to_phase": coord.proposal})
        self._broadcast(self._snapshot_frame(full_heatmap=False))

    def _snapshot_frame(self, full_heatmap: bool) -> dict:
        sim = self.sim
        coord = sim.coordinators[0]
        robots = []
        for r in sim.robots:
            robots.append({"node": r.node, "id": r.id, "kind": r.kind,
                           "x": round(r.pose[0], 3), "y": round(r.pose[1], 3),
                           "battery": round(r.battery, 1),
                           "health": r.health,
                           "task": r.current_task})
        frame = {
            "type": "state_snapshot", "seq": self._next_seq(),
            "tick": sim.tick, "phase": coord.phase,
            "paused": sim.paused, "finished": sim.finished,
            "completed": sim.completed,
            "coverage": round(coord.coverage_fraction(), 4),
            "robots": robots,
            "candidates": coord.candidate_snapshot(),
            "proposal": coord.proposal,
        }
        if full_heatmap:
            frame["heatmap"] = [round(float(v), 4)
                                for v in coord.heatmap.posterior()]
        return frame

    # -- websocket side ---------------------------------------------------------

    def _send_to(self, client: int, frame: dict) -> None:
        queue = self.clients.get(client)
        if queue is None or self.loop is None:
            return
        self.loop.call_soon_threadsafe(queue.put_nowait, frame)

    def _broadcast(self, frame: dict) -> None:
        for client in list(self.clients):
            self._send_to(client, frame)

    def hello_frame(self) -> dict:
        grid = self.sim.grid
        return {"type": "hello", "seq": 0,
                "protocol_version": PROTOCOL_VERSION,
                "grid": {"width": grid.width, "height": grid.height,
                         "cell_size": grid.cell_size},
                "mode": self.sim.mode,
                "supervised": self.sim.mcfg.supervised,
                "seed": self.sim.scenario.seed,
                "deploy_cell": self.sim.scenario.deploy_cell}

    def register(self) -> tuple[int, asyncio.Queue]:
        client = self._next_client
        self._next_client += 1
        queue: asyncio.Queue = asyncio.Queue()
        self.clients[client] = queue
        queue.put_nowait(self.hello_frame())
        queue.put_nowait(self._snapshot_frame(full_heatmap=True))
        return client, queue

    def unregister(self, client: int) -> None:
        self.clients.pop(client, None)

    def handle_frame(self, client: int, frame: dict) -> None:
        ftype = frame.get("type")
        their_id = frame.get("cmd_id")
        if ftype == "set_pace":
            self.pace = max(float(frame.get("ticks_per_second", 10.0)), 0.1)
            self._send_to(client, {"type": "ack", "seq": self._next_seq(),
                                   "cmd_id": their_id})
            return
        if ftype == "snapshot_request":
            self._send_to(client, self._snapshot_frame(full_heatmap=True))
            return
        if ftype not in COMMAND_TYPES:
            self._send_to(client, {"type": "error", "seq": self._next_seq(),
                                   "cmd_id": their_id, "code": "bad_frame",
                                   "message": f"unknown frame type {ftype!r}"})
            return
        if ftype == "retask":
            args = (frame.get("robot"), frame.get("task"))
        elif ftype in ("confirm_candidate", "dismiss_candidate"):
            args = (frame.get("candidate"),)
        else:
            args = ()
        if any(a is None for a in args):
            self._send_to(client, {"type": "error", "seq": self._next_seq(),
                                   "cmd_id": their_id, "code": "bad_frame",
                                   "message": f"{ftype} frame missing arguments"})
            return
        with self._lock:
            engine_id = self.sim.submit_command(ftype, args)
            self._pending[engine_id] = (client, their_id)

    def start_engine(self) -> None:
        self.thread = threading.Thread(target=self.engine_loop, daemon=True)
        self.thread.start()


def build_app(gateway: Gateway):
    """FastAPI app exposing /ws plus the static console bundle when built."""
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI()

    @app.on_event("startup")
    async def _startup():
        gateway.loop = asyncio.get_running_loop()
        gateway.start_engine()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        client, queue = gateway.register()

        async def pump_out():
            while True:
                frame = await queue.get()
                await ws.send_text(json.dumps(frame, sort_keys=True))

        task = asyncio.create_task(pump_out())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    frame = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps(
                        {"type": "error", "seq": -1, "cmd_id": None,
                         "code": "bad_frame", "message": "frame is not JSON"}))
                    continue
                gateway.handle_frame(client, frame)
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()
            gateway.unregister(client)

    console_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if console_dir.is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(console_dir), html=True),
                  name="console")
    return app


def serve_forever(scenario: Scenario, *, mode=None, max_ticks=50000,
                  host="127.0.0.1", port=8700, pace=10.0, supervised=True):
    import uvicorn

    gateway = Gateway(scenario, mode=mode, max_ticks=max_ticks, pace=pace,
                      supervised=supervised)
    app = build_app(gateway)
    uvicorn.run(app, host=host, port=port, log_level="warning")
