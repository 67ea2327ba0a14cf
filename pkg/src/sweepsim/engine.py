"""Deterministic discrete-time engine.

One tick executes a fixed sub-order:

  0. operator commands + scheduled faults
  1. topology rebuild from current poses (and brain election in mns mode)
  2. message deliveries (one hop per base_latency ticks, per-hop loss)
  3. controllers in node-id order (coordinators allocate, executives plan)
  4. motion (and battery/recharge accounting)
  5. scans at post-motion poses
  6. fusion owners integrate the readings delivered in step 2

Every stochastic draw comes from a per-(node, purpose) Philox stream keyed
by the scenario seed, so (scenario, seed) fully determines the event log.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import config as cfg
from . import fleet as fleet_mod
from . import netsim
from .errors import ConfigError, IncompatibleLog, InvalidCommand, InvalidSchedule
from .executive import RobotExec
from .fleet import RobotState
from .metrics import MetricsReducer
from .mission import Coordinator, OperatorCommand
from .rng import rng_stream
from .sensors import scan
from .world import Scenario, scenario_to_dict

ENGINE_VERSION = "1.0"
LOG_VERSION = 1


@dataclass(frozen=True)
class SimClock:
    tick: int = 0
    dt: float = 1.0


def _canon(value):
    """Round floats to 1e-9 and strip numpy types so hashes are stable."""
    if isinstance(value, dict):
        return {k: _canon(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return round(float(value), 9)
    if isinstance(value, np.ndarray):
        return [_canon(v) for v in value.tolist()]
    return value


def canonical_line(record: dict) -> str:
    return json.dumps(_canon(record), sort_keys=True, separators=(",", ":"))


class EventLog:
    """Append-only record stream with a running content hash.

    Consumers (the metrics reducer, an optional JSONL file, an optional
    in-memory buffer) see records in exactly the order they were appended.
    """

    def __init__(self, path=None, retain: bool = False, consumers=()):
        self._hash = hashlib.sha256()
        self.count = 0
        self.records = [] if retain else None
        self._fh = open(path, "w", encoding="utf-8") if path else None
        self.consumers = list(consumers)

    def append(self, record: dict) -> None:
        record = _canon(record)
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        self._hash.update(line.encode("utf-8"))
        self._hash.update(b"\n")
        self.count += 1
        if self.records is not None:
            self.records.append(record)
        if self._fh is not None:
            self._fh.write(line + "\n")
        for consume in self.consumers:
            consume(record)

    def content_hash(self) -> str:
        return self._hash.hexdigest()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


# ---------------------------------------------------------------------------
# fault schedule

FAULT_KINDS = ("robot_failure", "comms_blackout", "jamming_spike")


@dataclass(frozen=True)
class FaultEntry:
    kind: str
    robot: str | int | None = None
    tick: int = 0
    from_tick: int = 0
    to_tick: int | None = None     # inclusive start, exclusive end; None = forever
    nodes: tuple[int, ...] = ()
    p_link_loss: float = 0.0


class FaultSchedule:
    def __init__(self, entries=()):
        self.entries: list[FaultEntry] = []
        for e in entries:
            self.add(e)

    def add(self, entry: FaultEntry) -> None:
        if entry.kind not in FAULT_KINDS:
            raise InvalidSchedule(f"unknown fault kind {entry.kind!r}")
        if entry.kind == "robot_failure":
            for other in self.entries:
                if other.kind == "robot_failure" and other.robot == entry.robot:
                    raise InvalidSchedule(
                        f"robot {entry.robot!r} already scheduled to fail")
        if entry.kind == "jamming_spike":
            for other in self.entries:
                if other.kind != "jamming_spike":
                    continue
                a0, a1 = other.from_tick, other.to_tick
                b0, b1 = entry.from_tick, entry.to_tick
                overlap = (a1 is None or b0 < a1) and (b1 is None or a0 < b1)
                if overlap and other.p_link_loss != entry.p_link_loss:
                    raise InvalidSchedule(
                        "overlapping jamming spikes with contradictory loss rates")
        self.entries.append(entry)

    @classmethod
    def from_doc(cls, doc) -> "FaultSchedule":
        sched = cls()
        for raw in doc:
            kind = raw.get("kind")
            if kind == "robot_failure":
                sched.add(FaultEntry(kind=kind, robot=raw["robot"],
                                     tick=int(raw["tick"])))
            elif kind == "comms_blackout":
                sched.add(FaultEntry(kind=kind,
                                     nodes=tuple(int(n) for n in raw["nodes"]),
                                     from_tick=int(raw["from"]),
                                     to_tick=(None if raw.get("to") is None
                                              else int(raw["to"]))))
            elif kind == "jamming_spike":
                sched.add(FaultEntry(kind=kind,
                                     p_link_loss=float(raw["p_link_loss"]),
                                     from_tick=int(raw["from"]),
                                     to_tick=(None if raw.get("to") is None
                                              else int(raw["to"]))))
            else:
                raise InvalidSchedule(f"unknown fault kind {kind!r}")
        return sched

    def failures_at(self, tick: int):
        return [e for e in self.entries
                if e.kind == "robot_failure" and e.tick == tick]

    def blackout_nodes(self, tick: int) -> frozenset:
        nodes = set()
        for e in self.entries:
            if e.kind != "comms_blackout":
                continue
            if e.from_tick <= tick and (e.to_tick is None or tick < e.to_tick):
                nodes.update(e.nodes)
        return frozenset(nodes)

    def p_loss_override(self, tick: int) -> float | None:
        for e in self.entries:
            if e.kind != "jamming_spike":
                continue
            if e.from_tick <= tick and (e.to_tick is None or tick < e.to_tick):
                return e.p_link_loss
        return None


def inject_fault(schedule: FaultSchedule, entry: FaultEntry) -> None:
    """Validate and append one fault entry (InvalidSchedule on conflicts)."""
    schedule.add(entry)


# ---------------------------------------------------------------------------


class SimRun:
    """One deterministic run; step() advances a single tick."""

    def __init__(self, scenario: Scenario, *, max_ticks: int = 5000,
                 mode: str | None = None,
                 mission_cfg: cfg.MissionConfig | None = None,
                 faults: FaultSchedule | None = None,
                 log_path=None, retain_events: bool = False,
                 net_trace=None):
        if max_ticks < 0:
            raise ConfigError("max_ticks must be >= 0")
        self.scenario = scenario
        self.grid = scenario.grid
        self.mode = mode or scenario.controller_mode
        if self.mode not in ("centralized", "mns"):
            raise ConfigError(f"unknown controller mode {self.mode!r}")
        self.mcfg = mission_cfg or cfg.MissionConfig()
        self.max_ticks = max_ticks
        self.faults = faults or FaultSchedule()
        self.clock = SimClock(0, 1.0)
        self.tick = 0
        self.paused = False
        self.aborted = False
        self.completed = False
        self.finished = False

        self.reducer = MetricsReducer()
        self.frame_hook = None       # opserver taps events here
        self.log = EventLog(path=log_path, retain=retain_events,
                            consumers=[self.reducer.consume, self._tap])

        seed = scenario.seed
        fc = scenario.fleet_config
        self.robots = fleet_mod.default_fleet(fc, self.grid, scenario.deploy_cell)
        self.by_node: dict[int, RobotState] = {r.node: r for r in self.robots}
        self.roster = {r.node: r.kind for r in self.robots}
        self.execs: dict[int, RobotExec] = {
            r.node: RobotExec(r, self.grid, self.mcfg, fc, scenario.deploy_cell)
            for r in self.robots}
        self.scan_streams = {r.node: rng_stream(seed, r.node, "scan")
                             for r in self.robots}
        self.net = netsim.MeshNet(scenario.net_config,
                                  rng_stream(seed, 0, "net"), trace=net_trace)

        coord_nodes = [0] if self.mode == "centralized" else [0] + sorted(self.roster)
        self.coordinators: dict[int, Coordinator] = {
            n: Coordinator(n, scenario, self.mcfg, self.roster,
                           log=self.log.append, mode=self.mode)
            for n in coord_nodes}

        self._resolve_fault_robots()
        self.command_queue: list[tuple[int, OperatorCommand]] = []
        self.command_results: list[dict] = []
        self._next_cmd_id = 0
        self._prev_components: dict[int, tuple] = {}
        self.epochs: dict[int, int] = {}
        self.topology = None
        self.components: list[list[int]] = []
        self.brain_of: dict[int, int] = {}

        self.log.append({
            "kind": "header", "t": 0, "log_version": LOG_VERSION,
            "engine": ENGINE_VERSION, "mode": self.mode,
            "max_ticks": max_ticks,
            "scenario": scenario_to_dict(scenario),
        })

    def _tap(self, record: dict) -> None:
        if self.frame_hook is not None:
            self.frame_hook(record)

    # -- operator interface --------------------------------------------------

    def poll_commands(self) -> None:
        """Apply queued operator commands between ticks (a tick boundary)."""
        self._apply_commands()
        if self.aborted and not self.finished:
            self._finish()

    def submit_command(self, cmd: str, args: tuple = ()) -> int:
        """Queue an operator command; applied at the next tick boundary."""
        cmd_id = self._next_cmd_id
        self._next_cmd_id += 1
        self.command_queue.append((cmd_id, OperatorCommand(cmd=cmd, args=args)))
        return cmd_id

    def proposal_pending(self):
        return self.coordinators[0].proposal

    def _apply_commands(self) -> None:
        queue, self.command_queue = self.command_queue, []
        for cmd_id, command in queue:
            ok, error = True, None
            try:
                if command.cmd == "pause":
                    self.paused = True
                elif command.cmd == "resume":
                    self.paused = False
                elif command.cmd == "abort":
                    self.aborted = True
                else:
                    self._route_operator(command)
            except InvalidCommand as exc:
                ok, error = False, str(exc)
            if command.cmd in ("pause", "resume", "abort"):
                self.log.append({"kind": "operator", "t": self.tick, "node": 0,
                                 "cmd": command.cmd, "args": list(command.args)})
            self.command_results.append(
                {"cmd_id": cmd_id, "cmd": command.cmd, "ok": ok, "error": error})

    def _route_operator(self, command: OperatorCommand) -> None:
        """Mission commands act on the brain of the centre's component."""
        brain = self.brain_of.get(0, 0)
        if brain == 0 or self.mode == "centralized":
            self.coordinators[0].handle_operator_command(command, self.tick)
        else:
            self.net.send(0, brain, "operator_cmd", command, self.tick)

    # -- faults --------------------------------------------------------------

    def _resolve_fault_robots(self) -> None:
        by_name = {r.id: r.node for r in self.robots}
        for e in self.faults.entries:
            if e.kind != "robot_failure":
                continue
            robot = e.robot
            if isinstance(robot, str):
                if robot not in by_name:
                    raise InvalidSchedule(f"unknown robot {robot!r}")
            elif robot not in self.by_node:
                raise InvalidSchedule(f"unknown robot node {robot!r}")

    def _apply_faults(self) -> None:
        by_name = {r.id: r.node for r in self.robots}
        for e in self.faults.failures_at(self.tick):
            node = by_name[e.robot] if isinstance(e.robot, str) else e.robot
            robot = self.by_node[node]
            if robot.health == "failed":
                continue
            fleet_mod.fail_robot(self.by_node, node)
            self.execs[node]._drop_task()
            self.log.append({"kind": "robot_fail", "t": self.tick,
                             "robot": node, "id": robot.id})

    # -- main loop --------------------------------------------------------------

    def _positions(self) -> dict[int, tuple[float, float]]:
        poses = {0: self.scenario.net_config.command_centre_pos}
        for r in self.robots:
            if r.alive:
                poses[r.node] = r.pose
        return poses

    def _elect(self) -> None:
        self.components = netsim.partitions(self.topology)
        self.brain_of = {}
        changed = []
        for comp in self.components:
            brain = comp[0]
            for node in comp:
                self.brain_of[node] = brain
                if self._prev_components.get(node) != tuple(comp):
                    self._prev_components[node] = tuple(comp)
                    self.epochs[node] = self.epochs.get(node, 0) + 1
                    if node == brain:
                        changed.append(comp)
        if self.mode == "mns":
            for comp in changed:
                coord = self.coordinators.get(comp[0])
                if coord is not None:
                    coord.epoch = self.epochs[comp[0]]
                self.log.append({"kind": "election", "t": self.tick,
                                 "brain": comp[0], "members": list(comp),
                                 "epoch": self.epochs[comp[0]]})

    def step(self) -> None:
        if self.finished:
            return
        if self.tick >= self.max_ticks:
            self._finish()
            return
        t = self.tick
        # 0: operator commands, faults
        self._apply_commands()
        if self.aborted:
            self._finish()
            return
        self._apply_faults()
        p_loss = self.faults.p_loss_override(t)
        blackout = self.faults.blackout_nodes(t)

        # 1: topology + election
        dead = frozenset(r.node for r in self.robots if not r.alive)
        self.topology = netsim.rebuild_topology(self._positions(),
                                                self.scenario.net_config,
                                                dead=dead, blackout=blackout)
        self._elect()

        # 2: deliveries
        inboxes = self.net.step(self.topology, t, p_loss)
        readings_in: dict[int, list] = {}
        control_in: dict[int, list] = {}
        for node, msgs in inboxes.items():
            for msg in msgs:
                bucket = readings_in if msg.kind == "reading" else control_in
                bucket.setdefault(node, []).append(msg)

        # 3: controllers in node order
        scan_plan: dict[int, tuple] = {}
        for node in sorted({0, *self.roster}):
            if node == 0 or (self.mode == "mns"
                             and self.brain_of.get(node) == node):
                coord = self.coordinators.get(node)
                if coord is not None:
                    comp = next((c for c in self.components if node in c), [node])
                    for dst, kind, payload in coord.control_step(
                            t, control_in.get(node, []), comp):
                        self.net.send(node, dst, kind, payload, t)
            if node == 0:
                continue
            robot = self.by_node[node]
            if not robot.alive:
                continue
            ex = self.execs[node]
            brain = 0 if self.mode == "centralized" else self.brain_of.get(node, node)
            outbox, scan_kinds = ex.control_step(t, control_in.get(node, []), brain)
            for dst, kind, payload in outbox:
                self.net.send(node, dst, kind, payload, t)
            if scan_kinds:
                scan_plan[node] = scan_kinds

        # 4: motion + battery
        pre_pose: dict[int, tuple[float, float]] = {}
        for node in sorted(self.roster):
            robot = self.by_node[node]
            ex = self.execs[node]
            pre_pose[node] = robot.pose
            if robot.alive and ex.waypoints and robot.mobile:
                ex.waypoints = fleet_mod.step_motion(robot, ex.waypoints,
                                                     self.clock.dt,
                                                     grid_width=self.grid.width)
            elif robot.alive and ex.mode in ("dwell", "contact"):
                robot.battery = max(robot.battery - self.clock.dt, 0.0)
            if (robot.alive and ex.mode == "return" and not ex.waypoints
                    and robot.nav_cell == self.scenario.deploy_cell
                    and robot.battery < robot.battery_capacity):
                robot.battery = robot.battery_capacity
                ex.mode = "idle"
                self.log.append({"kind": "recharge", "t": t, "robot": node})

        # 5: scans
        fcfg = self.scenario.fleet_config
        sigma = (fcfg.pose_sigma_outdoor, fcfg.pose_sigma_indoor)
        for node in sorted(scan_plan):
            robot = self.by_node[node]
            if not robot.alive:
                continue
            ex = self.execs[node]
            for kind in scan_plan[node]:
                spec = fcfg.sensors[kind]
                reading = scan(spec, pre_pose[node], self.grid,
                               self.scenario.threat_by_cell,
                               self.scan_streams[node], tick=t, robot_id=node,
                               reading_seq=ex.next_reading_seq(),
                               pose_to=robot.pose, pose_sigma=sigma)
                ex.note_reading(reading)
                self.log.append({
                    "kind": "reading", "t": t, "id": list(reading.id),
                    "robot": node, "sensor": kind,
                    "cells": [int(c) for c in reading.cells],
                    "n_det": int(reading.detections.sum())})

        # 6: fusion owners ingest delivered readings
        for node in sorted(self.coordinators):
            coord = self.coordinators[node]
            msgs = readings_in.get(node, [])
            if msgs or (self.mode == "centralized" and node == 0) \
                    or self.brain_of.get(node) == node:
                comp = next((c for c in self.components if node in c), [node])
                for dst, kind, payload in coord.fusion_step(t, msgs, comp):
                    self.net.send(node, dst, kind, payload, t)

        self.tick += 1
        if self._mission_complete():
            self.completed = True
            self._finish()
        elif self.tick >= self.max_ticks:
            self._finish()

    def _mission_complete(self) -> bool:
        if self.mode == "centralized":
            return self.coordinators[0].phase == "Complete"
        alive = {r.node for r in self.robots if r.alive}
        checked = False
        for comp in self.components:
            if not alive.intersection(comp):
                continue
            coord = self.coordinators.get(comp[0])
            if coord is None or coord.phase != "Complete":
                return False
            checked = True
        return checked

    def _finish(self) -> None:
        if self.finished:
            return
        self.finished = True
        self.log.append({"kind": "end", "t": self.tick,
                         "completed": self.completed, "aborted": self.aborted,
                         "net": dict(self.net.counters),
                         "robots_failed": sum(1 for r in self.robots
                                              if not r.alive)})
        self.log.close()

    def run_to_completion(self):
        while not self.finished:
            self.step()
        return self.log, self.reducer.report(seed=self.scenario.seed,
                                             mode=self.mode)


def run(scenario: Scenario, max_ticks: int = 5000, mode: str | None = None,
        **kwargs):
    """Execute a run; returns (EventLog, metrics report dict)."""
    sim = SimRun(scenario, max_ticks=max_ticks, mode=mode, **kwargs)
    return sim.run_to_completion()


def replay(path) -> dict:
    """Recompute the metrics report purely from an event-log file."""
    reducer = MetricsReducer()
    saw_header = saw_end = False
    seed = mode = None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("kind") == "header":
                if record.get("log_version") != LOG_VERSION:
                    raise IncompatibleLog(
                        f"log_version {record.get('log_version')!r}")
                saw_header = True
                seed = record["scenario"]["seed"]
                mode = record["mode"]
            if record.get("kind") == "end":
                saw_end = True
            reducer.consume(record)
    if not saw_header or not saw_end:
        raise IncompatibleLog("event log is truncated (missing header or end)")
    return reducer.report(seed=seed, mode=mode)
