import dataclasses

import numpy as np
import pytest

from sweepsim import config as cfg
from sweepsim import fusion, netsim, world
from sweepsim.errors import InvalidCommand
from sweepsim.mission import (Coordinator, OperatorCommand, ReadingBatch,
                              StatusReport)
from sweepsim.sensors import SensorReading


def flat_scenario(w=16, h=16, threats=0, seed=3):
    params = world.ScenarioParams(width=w, height=h, threat_count=threats,
                                  indoor_fraction=0.0, obstacle_density=0.0)
    return world.generate_scenario(params, seed)


ROSTER = {1: "SUAV", 2: "SUAV", 3: "LUAV", 4: "SUGV", 5: "SUGV", 6: "LUGV"}


def make_coord(scenario, **overrides):
    mcfg = cfg.with_overrides(cfg.MissionConfig(), **overrides)
    return Coordinator(0, scenario, mcfg, ROSTER)


def msg(kind, payload, src=1, mid=0):
    return netsim.Message(id=mid, src=src, dst=0, kind=kind, payload=payload,
                          sent_tick=0, ttl=50)


def status(node, tick, cell, idle=True, task_key=None, battery=1000.0):
    x = (cell % 16) + 0.5
    y = (cell // 16) + 0.5
    return msg("status", StatusReport(node=node, tick=tick, pose=(x, y),
                                      nav_cell=cell, battery=battery,
                                      idle=idle, task_key=task_key), src=node)


def detection_reading(cells, rid, kind="EMI", tick=0):
    cells = np.asarray(sorted(cells), dtype=np.int64)
    det = np.ones(cells.size, dtype=bool)
    feats = np.zeros((cells.size, 4))
    return SensorReading(id=rid, robot_id=rid[0], kind=kind, tick=tick,
                         cells=cells, detections=det, features=feats)


def hot_anchor(coord, cell, n_hits=4, src=4, kind="EMI", tick=0):
    """Drive a cell's posterior over the candidate threshold."""
    readings = [detection_reading([cell], (src, 1000 + i), kind=kind, tick=tick)
                for i in range(n_hits)]
    coord.fusion_step(tick, [msg("reading", ReadingBatch(tuple(readings)),
                                 src=src)], list(range(7)))
    return coord


def test_reading_integration_is_exactly_once():
    coord = make_coord(flat_scenario())
    r = detection_reading([5], (4, 0))
    batch = msg("reading", ReadingBatch((r,)), src=4)
    coord.fusion_step(0, [batch], list(range(7)))
    lo_once = coord.heatmap.log_odds.copy()
    coord.fusion_step(1, [msg("reading", ReadingBatch((r,)), src=4, mid=1)],
                      list(range(7)))
    assert np.array_equal(coord.heatmap.log_odds, lo_once)


def test_emi_need_assigned_to_idle_sugv():
    coord = make_coord(flat_scenario())
    hot_anchor(coord, 100)
    ticks = [status(n, 5, cell) for n, cell in
             ((1, 0), (2, 1), (3, 2), (4, 40), (5, 200), (6, 17))]
    coord.control_step(5, ticks, list(range(7)))
    orders = coord.control_step(5, [], list(range(7)))
    spec_orders = [(n, o) for n, o in orders if o.key == "spec:100"]
    assert len(spec_orders) == 1
    node, order = spec_orders[0]
    assert node == 4           # nearest eligible (SUGV at cell 40)
    assert order.kind == "emi_scan"


def test_confirm_only_assignable_to_lugv():
    coord = make_coord(flat_scenario())
    coord.phase = "Confirmation"
    hot_anchor(coord, 100)
    coord.spec_scanned[:] = True
    stats = [status(n, 5, 10 + n) for n in (1, 2, 3, 4, 5)]   # no LUGV report
    coord.control_step(5, stats, list(range(7)))
    orders = coord.control_step(5, [], list(range(7)))
    assert not any(o.key.startswith("confirm:") for _, o in orders)
    coord.control_step(10, [status(6, 10, 20)], list(range(7)))
    orders = coord.control_step(10, [], list(range(7)))
    confirm = [o for _, o in orders if o.key == "confirm:100"]
    assert len(confirm) == 1 and confirm[0].kind == "confirm_candidate"


def test_equal_priority_ties_break_to_lower_ids():
    coord = make_coord(flat_scenario())
    hot_anchor(coord, 60)
    # two idle SUGVs equidistant from the anchor
    stats = [status(4, 5, 58), status(5, 5, 62)]
    coord.control_step(5, stats, list(range(7)))
    orders = coord.control_step(5, [], list(range(7)))
    spec = [(n, o) for n, o in orders if o.key == "spec:60"]
    assert spec and spec[0][0] == 4


def test_failed_robot_tasks_return_to_pool():
    coord = make_coord(flat_scenario(), stale_timeout=5)
    hot_anchor(coord, 100)
    coord.control_step(5, [status(4, 5, 99)], list(range(7)))
    orders = coord.control_step(5, [], list(range(7)))
    assert coord.assignment.get("spec:100") == 4
    # robot goes silent (failed); assignment must clear within a cycle
    coord.control_step(15, [], list(range(7)))
    assert "spec:100" not in coord.assignment
    # another eligible robot picks it up
    coord.control_step(20, [status(5, 20, 90)], list(range(7)))
    orders = coord.control_step(20, [], list(range(7)))
    assert any(o.key == "spec:100" and n == 5 for n, o in orders)


def test_coverage_gate_advances_phase():
    s = flat_scenario()
    coord = make_coord(s)
    n = s.grid.n_cells
    covered = detection_reading(range(n), (1, 0), kind="RGB")
    covered.detections[:] = False
    coord.fusion_step(0, [msg("reading", ReadingBatch((covered,)))],
                      list(range(7)))
    assert coord.coverage_fraction() == pytest.approx(1.0)
    assert coord.phase == "SpecialisedDetection"


def test_partial_coverage_does_not_advance():
    s = flat_scenario()
    coord = make_coord(s)
    half = detection_reading(range(s.grid.n_cells // 2), (1, 0), kind="RGB")
    half.detections[:] = False
    coord.fusion_step(0, [msg("reading", ReadingBatch((half,)))],
                      list(range(7)))
    assert coord.phase == "Explore"


def test_supervised_gate_waits_for_approval():
    s = flat_scenario()
    coord = make_coord(s, supervised=True)
    n = s.grid.n_cells
    covered = detection_reading(range(n), (1, 0), kind="RGB")
    covered.detections[:] = False
    coord.fusion_step(0, [msg("reading", ReadingBatch((covered,)))],
                      list(range(7)))
    assert coord.phase == "Explore"
    assert coord.proposal == "SpecialisedDetection"
    coord.handle_operator_command(OperatorCommand("approve_phase"), 1)
    assert coord.phase == "SpecialisedDetection"


def test_operator_command_validation():
    coord = make_coord(flat_scenario())
    with pytest.raises(InvalidCommand):
        coord.handle_operator_command(OperatorCommand("approve_phase"), 0)
    with pytest.raises(InvalidCommand):
        coord.handle_operator_command(
            OperatorCommand("dismiss_candidate", (123,)), 0)
    hot_anchor(coord, 77)
    coord.handle_operator_command(OperatorCommand("dismiss_candidate", (77,)), 1)
    assert coord.resolutions[77].status == "dismissed"
    assert coord.resolutions[77].reason == "operator"
    # dismissed candidates never return to allocation
    assert "spec:77" not in {nd.key for nd in coord.compute_needs()}
    with pytest.raises(InvalidCommand):
        coord.handle_operator_command(OperatorCommand("unknown_cmd"), 2)


def test_operator_retask_eligibility():
    coord = make_coord(flat_scenario())
    hot_anchor(coord, 100)
    coord.phase = "Confirmation"
    with pytest.raises(InvalidCommand):   # SUAV cannot take a confirm task
        coord.handle_operator_command(
            OperatorCommand("retask", (1, "confirm:100")), 0)
    coord.handle_operator_command(
        OperatorCommand("retask", (6, "confirm:100")), 0)
    assert coord.pins["confirm:100"] == 6


def test_operator_confirm_candidate_sets_status():
    coord = make_coord(flat_scenario())
    hot_anchor(coord, 50)
    coord.handle_operator_command(OperatorCommand("confirm_candidate", (50,)), 0)
    assert coord.anchors[50].status == "confirmed"


def test_sd_gate_requires_cluster_scans_then_override():
    s = flat_scenario()
    coord = make_coord(s, supervised=False)
    coord.phase = "SpecialisedDetection"
    coord.covered[:] = True
    hot_anchor(coord, 100, kind="RGB")        # vision-only candidate
    assert coord.phase == "SpecialisedDetection"   # unscanned cluster blocks
    coord.handle_operator_command(OperatorCommand("approve_phase"), 5)
    assert coord.phase == "Confirmation"      # documented operator override


def test_split_merge_union_heatmap():
    s = flat_scenario()
    a = make_coord(s)
    b = make_coord(s)
    union = make_coord(s)
    readings_a = [detection_reading([10 + i], (4, i)) for i in range(5)]
    readings_b = [detection_reading([60 + i], (5, i)) for i in range(5)]
    a.fusion_step(0, [msg("reading", ReadingBatch(tuple(readings_a)), src=4)],
                  [0, 4])
    b.fusion_step(0, [msg("reading", ReadingBatch(tuple(readings_b)), src=5)],
                  [5])
    # merge: the surviving brain ingests the other side's readings (dedup)
    a.fusion_step(1, [msg("reading", ReadingBatch(tuple(readings_b)), src=5,
                          mid=1),
                      msg("reading", ReadingBatch(tuple(readings_a)), src=4,
                          mid=2)], [0, 4, 5])
    union.fusion_step(0, [msg("reading",
                              ReadingBatch(tuple(readings_a + readings_b)))],
                      list(range(7)))
    assert np.max(np.abs(a.heatmap.log_odds - union.heatmap.log_odds)) < 1e-9
    assert a.integrated == union.integrated


def test_sync_blob_adoption_is_idempotent():
    s = flat_scenario()
    a = make_coord(s)
    hot_anchor(a, 40)
    a.handle_operator_command(OperatorCommand("dismiss_candidate", (40,)), 2)
    blob = a.sync_blob()
    b = make_coord(s)
    carrier = msg("status", StatusReport(node=4, tick=5, pose=(0.5, 0.5),
                                         nav_cell=0, battery=10.0, idle=True,
                                         task_key=None, sync=blob), src=4)
    for _ in range(3):
        b.control_step(5, [carrier], list(range(7)))
    assert b.resolutions[40].status == "dismissed"
    assert len([r for r in b.resolutions.values()]) == 1
