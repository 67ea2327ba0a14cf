import dataclasses

import networkx as nx
import numpy as np
import pytest

from sweepsim import config as cfg
from sweepsim import fleet, world
from sweepsim.errors import SensorUnavailable, Unreachable, UnknownRobot


def test_default_fleet_composition(small_scenario):
    robots = fleet.default_fleet(cfg.FleetConfig(), small_scenario.grid,
                                 small_scenario.deploy_cell)
    kinds = sorted(r.kind for r in robots)
    assert kinds == ["LUAV", "LUGV", "SUAV", "SUAV", "SUGV", "SUGV"]
    assert len(robots) == 6
    assert [r.node for r in robots] == [1, 2, 3, 4, 5, 6]
    by_kind = {r.kind: r for r in robots}
    assert by_kind["SUGV"].battery == 18000.0       # ~5 hours
    assert by_kind["LUGV"].battery == 43200.0       # ~half a day
    assert "XRB" in by_kind["LUGV"].sensors
    assert "RAMAN" in by_kind["LUGV"].sensors
    assert by_kind["LUGV"].arm_deployed is False


def test_loadout_invariant_enforced():
    with pytest.raises(ValueError):
        fleet.RobotState(id="SUAV-9", node=9, kind="SUAV", pose=(0.5, 0.5),
                         speed=10.0, battery=100.0, battery_capacity=100.0,
                         sensors=("GPR",))
    for kind, loadout in cfg.LOADOUTS.items():
        r = fleet.RobotState(id=f"{kind}-1", node=1, kind=kind, pose=(0.5, 0.5),
                             speed=1.0, battery=10.0, battery_capacity=10.0)
        assert r.sensors == loadout


def open_grid(w, h):
    n = w * h
    return world.WorldGrid(w, h, np.zeros(n, dtype=np.int8),
                           np.zeros(n, dtype=bool), np.zeros(n, dtype=bool),
                           np.full(n, 0.02))


def test_plan_path_straight_line():
    grid = open_grid(8, 3)
    path = fleet.plan_path(grid, 8, 12, "SUGV")  # (1,0) -> (1,4)
    assert len(path) == 5
    assert path[0] == 8 and path[-1] == 12


def test_plan_path_enclosed_target_ground_vs_aerial():
    grid_arrays = open_grid(7, 7)
    obstacle = grid_arrays.obstacle.copy()
    # wall off the centre cell 24 completely
    for cell in (16, 17, 18, 23, 25, 30, 31, 32):
        obstacle[cell] = True
    grid = world.WorldGrid(7, 7, grid_arrays.terrain.copy(),
                           grid_arrays.indoor.copy(), obstacle,
                           grid_arrays.terrain_prior.copy())
    with pytest.raises(Unreachable):
        fleet.plan_path(grid, 0, 24, "SUGV")
    path = fleet.plan_path(grid, 0, 24, "SUAV")   # outdoor obstacles overflown
    assert path[-1] == 24


def test_plan_path_matches_bfs_oracle_on_random_grids():
    rng = np.random.default_rng(77)
    for _ in range(120):
        w, h = 20, 20
        obstacle = rng.random(w * h) < 0.25
        grid = world.WorldGrid(w, h, np.zeros(w * h, dtype=np.int8),
                               np.zeros(w * h, dtype=bool), obstacle,
                               np.full(w * h, 0.02))
        free = np.flatnonzero(~obstacle)
        src, dst = (int(v) for v in rng.choice(free, size=2, replace=False))
        g = nx.Graph()
        for cell in free:
            r, c = divmod(int(cell), w)
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == dc == 0:
                        continue
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < h and 0 <= nc < w and not obstacle[nr * w + nc]:
                        g.add_edge(int(cell), nr * w + nc)
        g.add_nodes_from(int(c) for c in free)
        try:
            expected = nx.shortest_path_length(g, src, dst)
        except nx.NetworkXNoPath:
            with pytest.raises(Unreachable):
                fleet.plan_path(grid, src, dst, "SUGV")
            continue
        path = fleet.plan_path(grid, src, dst, "SUGV")
        assert len(path) - 1 == expected


def make_robot(speed=2.0, battery=100.0):
    return fleet.RobotState(id="SUGV-1", node=4, kind="SUGV", pose=(0.5, 0.5),
                            speed=speed, battery=battery,
                            battery_capacity=battery, nav_cell=0)


def test_step_motion_advances_speed_times_dt():
    robot = make_robot(speed=2.0)
    remaining = fleet.step_motion(robot, [(10.5, 0.5)], dt=1.0)
    assert robot.pose == pytest.approx((2.5, 0.5))
    assert remaining == [(10.5, 0.5)]
    assert robot.battery == 99.0


def test_step_motion_halts_on_empty_battery():
    robot = make_robot(battery=0.0)
    fleet.step_motion(robot, [(5.5, 0.5)], dt=1.0)
    assert robot.pose == (0.5, 0.5)


def test_step_motion_partial_battery_clamps():
    robot = make_robot(speed=1.0, battery=5.0)
    fleet.step_motion(robot, [(20.5, 0.5)], dt=10.0)
    assert robot.battery == 0.0
    assert robot.pose[0] == pytest.approx(5.5)   # 5 s of motion only


def test_motion_distance_bounded_by_speed():
    rng = np.random.default_rng(2)
    robot = make_robot(speed=3.0, battery=1000.0)
    for _ in range(50):
        before = robot.pose
        wps = [(float(rng.uniform(0, 30)), float(rng.uniform(0, 30)))]
        fleet.step_motion(robot, wps, dt=1.0, grid_width=40)
        moved = np.hypot(robot.pose[0] - before[0], robot.pose[1] - before[1])
        assert moved <= 3.0 + 1e-9


def test_battery_non_increasing_during_motion():
    robot = make_robot(speed=1.0, battery=50.0)
    last = robot.battery
    for _ in range(60):
        fleet.step_motion(robot, [(100.5, 0.5)], dt=1.0)
        assert robot.battery <= last
        last = robot.battery


def test_scan_sensors_for_task():
    robot = make_robot()
    assert fleet.scan_sensors_for_task(robot, "emi_scan") == ("EMI",)
    with pytest.raises(SensorUnavailable):
        fleet.scan_sensors_for_task(robot, "gpr_sweep")
    suav = fleet.RobotState(id="SUAV-1", node=1, kind="SUAV", pose=(0.5, 0.5),
                            speed=10.0, battery=100.0, battery_capacity=100.0)
    with pytest.raises(SensorUnavailable):
        fleet.scan_sensors_for_task(suav, "gpr_sweep")


def test_fail_robot_idempotent_and_unknown():
    robots = {r.node: r for r in fleet.default_fleet(
        cfg.FleetConfig(), open_grid(10, 10), 0)}
    fleet.fail_robot(robots, 4)
    assert robots[4].health == "failed"
    fleet.fail_robot(robots, 4)     # idempotent
    assert robots[4].health == "failed"
    with pytest.raises(UnknownRobot):
        fleet.fail_robot(robots, 99)
