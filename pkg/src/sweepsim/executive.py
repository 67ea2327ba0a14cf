"""Robot-side controller: task execution, sweeping, store-and-forward.

Each robot runs a small executive that follows orders from whatever brain
currently coordinates its network component. It keeps every reading it has
ever produced and retransmits the ones the current brain has not
acknowledged, which gives exactly-once integration across partitions,
brain changes and message loss.
"""

from __future__ import annotations

import math

from . import config as cfg
from .errors import Unreachable
from .fleet import RobotState, plan_path, scan_sensors_for_task
from .mission import Ack, ReadingBatch, StatusReport, SyncLog, TaskOrder
from .world import WorldGrid


def _lattice_runs(grid: WorldGrid, cells: list[int], spacing: int,
                  robot_kind: str) -> list[int]:
    """Boustrophedon run endpoints over lattice rows of a cell set."""
    if not cells:
        return []
    w = grid.width
    rows: dict[int, list[int]] = {}
    for c in cells:
        rows.setdefault(c // w, []).append(c % w)
    row_ids = sorted(rows)
    lattice = [r for r in row_ids if (r - row_ids[0]) % spacing == spacing // 2]
    if not lattice:
        lattice = [row_ids[len(row_ids) // 2]]
    trav = grid.trav_mask(robot_kind)
    waypoints: list[int] = []
    for i, r in enumerate(lattice):
        runs = []
        run: list[int] = []
        for col in sorted(rows[r]):
            if not trav[r * w + col]:
                if run:
                    runs.append(run)
                    run = []
                continue
            if run and col != run[-1] + 1:
                runs.append(run)
                run = []
            run.append(col)
        if run:
            runs.append(run)
        if i % 2 == 1:
            runs = [list(reversed(rn)) for rn in reversed(runs)]
        for rn in runs:
            waypoints.append(r * w + rn[0])
            if rn[-1] != rn[0]:
                waypoints.append(r * w + rn[-1])
    return waypoints


def sweep_waypoints(grid: WorldGrid, target_cells, radius: float,
                    robot_kind: str) -> list[int]:
    """Sweep plan over a cell set, split by visibility domain.

    A sensor sees only cells sharing its pose's indoor flag, so outdoor and
    indoor cells get separate boustrophedon lattices. Outdoor rows are
    spaced to overlap swaths with ~2 cells of margin against pose noise;
    indoor rows are spaced at most 3 apart so every building interior
    (minimum 3 rows tall) gets at least one pass.
    """
    outdoor = [int(c) for c in sorted(target_cells) if not grid.indoor[int(c)]]
    indoor = [int(c) for c in sorted(target_cells) if grid.indoor[int(c)]]
    # swath half-width is radius+0.5; outdoor pose error is centimetres, so
    # one cell of overlap suffices there, while indoor (SLAM-grade error,
    # interiors at least 3 rows tall) gets a pass every 3 rows
    spacing = max(1, 2 * int(radius))
    waypoints = _lattice_runs(grid, outdoor, spacing, robot_kind)
    waypoints += _lattice_runs(grid, indoor, min(3, spacing), robot_kind)
    return waypoints


class RobotExec:
    """Local task executor for one robot."""

    def __init__(self, robot: RobotState, grid: WorldGrid,
                 mission_cfg: cfg.MissionConfig, fleet_cfg: cfg.FleetConfig,
                 deploy_cell: int):
        self.robot = robot
        self.grid = grid
        self.cfg = mission_cfg
        self.fleet_cfg = fleet_cfg
        self.deploy_cell = deploy_cell
        self.task: TaskOrder | None = None
        self.cell_targets: list[int] = []        # remaining sweep waypoints
        self.waypoints: list[tuple[float, float]] = []   # continuous polyline
        self.mode = "idle"        # idle | sweep | goto | dwell | contact | return
        self.dwell = 0
        self.own_readings: dict = {}              # id -> SensorReading
        self.new_readings: list = []
        self.acked: dict[int, set] = {}            # brain node -> reading ids
        self.cached_sync: tuple = ()
        self.last_retx = -1
        self.reading_seq = 0
        self.brain = 0
        self.idle_since: int | None = None

    # -- bookkeeping -------------------------------------------------------

    def note_reading(self, reading) -> None:
        self.own_readings[reading.id] = reading
        self.new_readings.append(reading)

    def next_reading_seq(self) -> int:
        seq = self.reading_seq
        self.reading_seq += 1
        return seq

    def _unacked(self, brain: int) -> list:
        seen = self.acked.get(brain, set())
        return [r for rid, r in self.own_readings.items() if rid not in seen]

    # -- task handling -------------------------------------------------------

    def _accept(self, order: TaskOrder) -> None:
        if order.revoke:
            if self.task is not None and self.task.key == order.key:
                self._drop_task()
            return
        if self.task is not None and self.task.key == order.key:
            return
        sensors = scan_sensors_for_task(self.robot, order.kind)
        self.task = order
        self.robot.current_task = order.key
        self.dwell = 0
        self.robot.arm_deployed = False
        if order.kind == "confirm_candidate":
            self.cell_targets = [order.anchor]
            self.mode = "goto"
        else:
            radius = self.fleet_cfg.sensors[sensors[0]].footprint_radius
            self.cell_targets = sweep_waypoints(self.grid, order.target_cells,
                                                radius, self.robot.kind)
            self.mode = "sweep"
        self.waypoints = []

    def _drop_task(self) -> None:
        self.task = None
        self.robot.current_task = None
        self.robot.arm_deployed = False
        self.cell_targets = []
        self.waypoints = []
        self.dwell = 0
        if self.mode != "return":
            self.mode = "idle"

    def _path_to(self, cell: int) -> bool:
        """Queue a continuous path to `cell`; False when unreachable."""
        start = self.robot.nav_cell
        try:
            path = plan_path(self.grid, start, cell, self.robot.kind)
        except Unreachable:
            return False
        self.waypoints = [self.grid.cell_center(c) for c in path[1:]]
        if not self.waypoints and start != cell:
            return False
        if start == cell:
            self.waypoints = []
        return True

    def _battery_low(self) -> bool:
        hx, hy = self.grid.cell_center(self.deploy_cell)
        x, y = self.robot.pose
        eta = math.hypot(hx - x, hy - y) / max(self.robot.speed, 1e-9)
        reserve = eta * self.cfg.battery_reserve_factor + 30.0
        return self.robot.battery <= reserve

    # -- main step -------------------------------------------------------------

    def control_step(self, tick: int, messages, brain: int):
        """Process inbox, refresh the plan; returns (outbox, scan_kinds)."""
        robot = self.robot
        brain_changed = brain != self.brain
        self.brain = brain
        for msg in messages:
            if msg.kind == "task":
                self._accept(msg.payload)
            elif msg.kind == "mns_control":
                payload = msg.payload
                if isinstance(payload, Ack):
                    self.acked.setdefault(payload.brain, set()).update(
                        payload.reading_ids)
                elif isinstance(payload, SyncLog):
                    self.cached_sync = payload.resolutions

        if not robot.mobile and robot.battery <= 0.0 and self.mode != "return":
            # battery died mid-field: nothing to do but report
            self._drop_task()
            self.mode = "idle"

        if self.mode not in ("return", "idle") and self._battery_low():
            self._drop_task()
            self.mode = "return"
            if not self._path_to(self.deploy_cell):
                self.mode = "idle"

        # out of work: rally at the deployment zone so a coordinator (or a
        # merged component) can reach us again
        if self.task is None and self.mode == "idle" and robot.mobile:
            if self.idle_since is None:
                self.idle_since = tick
            elif (tick - self.idle_since >= self.cfg.idle_home_timeout
                    and robot.nav_cell != self.deploy_cell):
                if self._path_to(self.deploy_cell):
                    self.mode = "return"
        else:
            self.idle_since = None

        scan_kinds: tuple[str, ...] = ()
        if self.mode == "sweep" and self.task is not None:
            while not self.waypoints and self.cell_targets:
                nxt = self.cell_targets.pop(0)
                if self.robot.nav_cell == nxt:
                    break
                if not self._path_to(nxt):
                    continue
            if not self.waypoints and not self.cell_targets:
                self._drop_task()
            else:
                scan_kinds = scan_sensors_for_task(robot, self.task.kind)
        elif self.mode == "goto" and self.task is not None:
            target = self.cell_targets[0]
            if robot.nav_cell == target and not self.waypoints:
                self.mode = "dwell"
                self.dwell = self.fleet_cfg.arm_dwell_ticks
                robot.arm_deployed = True
            elif not self.waypoints:
                if not self._path_to(target):
                    self._drop_task()
        elif self.mode == "dwell":
            self.dwell -= 1
            if self.dwell <= 0:
                self.mode = "contact"
        elif self.mode == "contact" and self.task is not None:
            scan_kinds = scan_sensors_for_task(robot, self.task.kind)
            self._drop_task()      # single contact pass per visit
        elif self.mode == "return" and not self.waypoints:
            self.mode = "idle"    # arrival handled by the engine (recharge)

        outbox = [(brain, "status",
                   StatusReport(node=robot.node, tick=tick, pose=robot.pose,
                                nav_cell=robot.nav_cell,
                                battery=robot.battery,
                                idle=self.task is None and self.mode == "idle",
                                task_key=self.task.key if self.task else None,
                                sync=self.cached_sync or None))]
        to_send = list(self.new_readings)
        self.new_readings = []
        if brain_changed or (tick - self.last_retx >= self.cfg.retx_interval):
            self.last_retx = tick
            sent_ids = {r.id for r in to_send}
            to_send.extend(r for r in self._unacked(brain)
                           if r.id not in sent_ids)
        if to_send:
            to_send.sort(key=lambda r: r.id)
            outbox.append((brain, "reading",
                           ReadingBatch(readings=tuple(to_send))))
        return outbox, scan_kinds
