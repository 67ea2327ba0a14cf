"""Robot fleet: kinds, loadouts, kinematics, batteries, path planning.

Robots are point masses on the grid plane. Aircraft ignore outdoor obstacles;
ground robots are blocked by any obstacle. The manipulator arm is modelled as
a dwell-time gate in front of contact-sensor scans, not as a joint chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import config as cfg
from . import kernels
from .errors import SensorUnavailable, Unreachable, UnknownRobot
from .world import WorldGrid

# which robot kinds may take which task kind, and the sensors a task uses
TASK_ELIGIBLE = {
    "explore_region": ("SUAV",),
    "gpr_sweep": ("LUAV",),
    "emi_scan": ("SUGV", "LUGV"),
    "confirm_candidate": ("LUGV",),
}
TASK_SENSORS = {
    "explore_region": ("RGB",),
    "gpr_sweep": ("GPR",),
    "emi_scan": ("EMI",),
    "confirm_candidate": ("XRB", "RAMAN", "EMI"),
}


@dataclass
class RobotState:
    id: str
    node: int                  # mesh-network node id (command centre is 0)
    kind: str
    pose: tuple[float, float]
    speed: float
    battery: float             # seconds remaining
    battery_capacity: float
    health: str = "ok"         # ok | failed
    sensors: tuple[str, ...] = ()
    current_task: str | None = None
    arm_deployed: bool = False
    nav_cell: int = -1          # last waypoint cell reached; always traversable

    def __post_init__(self):
        if not self.sensors:
            self.sensors = cfg.LOADOUTS[self.kind]
        if self.sensors != cfg.LOADOUTS[self.kind]:
            raise ValueError(f"{self.id}: loadout must match the {self.kind} table")

    @property
    def mobile(self) -> bool:
        return self.health == "ok" and self.battery > 0.0

    @property
    def alive(self) -> bool:
        return self.health == "ok"

    def cell(self, grid: WorldGrid) -> int:
        return grid.cell_of_pose(*self.pose)


def default_fleet(fleet_config: cfg.FleetConfig, grid: WorldGrid,
                  deploy_cell: int) -> list[RobotState]:
    """Instantiate the fleet at the deployment zone, node ids 1..n.

    Kind order is fixed (SUAV, LUAV, SUGV, LUGV) so node ids are stable for
    a given config.
    """
    drow, dcol = divmod(deploy_cell, grid.width)
    robots = []
    node = 1
    for kind in cfg.ROBOT_KINDS:
        for i in range(fleet_config.counts.get(kind, 0)):
            # 3x3 block around the deploy cell; scenario generation keeps
            # the deployment corner clear of obstacles and buildings
            slot = node - 1
            col = min(max(dcol - 1 + slot % 3, 0), grid.width - 1)
            row = min(max(drow - 1 + slot // 3, 0), grid.height - 1)
            robots.append(RobotState(
                id=f"{kind}-{i + 1}", node=node, kind=kind,
                pose=(col + 0.5, row + 0.5),
                speed=fleet_config.speeds[kind],
                battery=fleet_config.batteries[kind],
                battery_capacity=fleet_config.batteries[kind],
                nav_cell=row * grid.width + col))
            node += 1
    return robots


def plan_path(grid: WorldGrid, from_cell: int, to_cell: int,
              kind: str) -> list[int]:
    """Shortest 8-connected cell path for `kind`, (row, col) tie-break."""
    grid.check_bounds(from_cell)
    grid.check_bounds(to_cell)
    path = kernels.bfs_path(grid.trav_mask(kind), grid.width, grid.height,
                            from_cell, to_cell)
    if path is None:
        raise Unreachable(f"no {kind} path from cell {from_cell} to {to_cell}")
    return [int(c) for c in path]


def path_distance(grid: WorldGrid, from_cell: int, kind: str):
    """Hop-distance field from from_cell under this kind's traversability."""
    return kernels.bfs_dists(grid.trav_mask(kind), grid.width, grid.height,
                             from_cell)


def step_motion(robot: RobotState, waypoints: list[tuple[float, float]],
                dt: float, grid_width: int = 0) -> list[tuple[float, float]]:
    """Advance along the waypoint polyline by speed*dt metres.

    Battery drains by dt and clamps at zero; an empty battery halts the
    robot in place (health stays ok). Waypoints are cell centres; nav_cell
    tracks the last one reached (the robot's planning cell, which unlike
    the instantaneous pose can never sit inside an obstacle mid-diagonal).
    Returns the remaining waypoints.
    """
    if robot.health != "ok" or not waypoints:
        return waypoints
    usable = min(dt, robot.battery)
    robot.battery = max(robot.battery - dt, 0.0)
    budget = robot.speed * usable
    x, y = robot.pose
    remaining = list(waypoints)
    while budget > 1e-12 and remaining:
        tx, ty = remaining[0]
        seg = math.hypot(tx - x, ty - y)
        if seg <= budget:
            x, y = tx, ty
            budget -= seg
            remaining.pop(0)
            if grid_width:
                robot.nav_cell = int(ty) * grid_width + int(tx)
        else:
            frac = budget / seg
            x += (tx - x) * frac
            y += (ty - y) * frac
            budget = 0.0
    robot.pose = (x, y)
    return remaining


def scan_sensors_for_task(robot: RobotState, task_kind: str) -> tuple[str, ...]:
    """Sensors this robot fires for a task; SensorUnavailable if it lacks one."""
    wanted = TASK_SENSORS[task_kind]
    missing = [s for s in wanted if s not in robot.sensors]
    if missing:
        raise SensorUnavailable(
            f"{robot.id} lacks {','.join(missing)} required by {task_kind}")
    return wanted


def fail_robot(robots_by_node: dict[int, RobotState], node: int) -> RobotState:
    """Mark a robot failed (idempotent). It stops moving, scanning, talking."""
    robot = robots_by_node.get(node)
    if robot is None:
        raise UnknownRobot(f"no robot at node {node}")
    robot.health = "failed"
    robot.current_task = None
    return robot
