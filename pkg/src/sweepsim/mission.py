"""Mission coordination: phase machine, tasking, centralized/decentralized brains.

One Coordinator class implements the whole coordination brain. In
centralized mode a single instance runs at the command-centre node; in
decentralized (mns) mode every connected component elects the node with the
smallest id as its brain (the centre is id 0, so it coordinates whenever
reachable) and the elected node runs the identical logic over its component.
Under permanent full connectivity the two modes are therefore exactly
equivalent.

Tasks are derived, not stored: the brain recomputes outstanding "needs"
(explore this region, put a specialised sensor on that cluster, confirm that
candidate) from fused facts every allocation pass. Facts are per-cell
aggregates of integrated readings plus a resolution log, which makes brain
merges after a partition heal simple: robots re-deliver their readings
(deduplicated by id) and piggyback the previous brain's resolution log, and
the merged state is exactly the union.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import config as cfg
from . import fusion
from .errors import InvalidCommand
from .fleet import TASK_ELIGIBLE, path_distance
from .sensors import classify_evidence
from .world import Scenario, reachable_mask

PHASES = ("Explore", "SpecialisedDetection", "Confirmation", "Complete")
# resolution precedence when split brains disagree about one candidate
STATUS_RANK = {"classified": 0, "confirmed": 1, "dismissed": 2}
PHASE_INDEX = {p: i for i, p in enumerate(PHASES)}

TASK_KINDS = ("explore_region", "gpr_sweep", "emi_scan", "confirm_candidate")


# --------------------------------------------------------------------------
# wire payloads

@dataclass(frozen=True)
class TaskOrder:
    key: str
    kind: str
    target_cells: tuple[int, ...]
    anchor: int
    brain: int
    tick: int
    revoke: bool = False


@dataclass(frozen=True)
class StatusReport:
    node: int
    tick: int
    pose: tuple[float, float]
    nav_cell: int
    battery: float
    idle: bool
    task_key: str | None
    sync: tuple | None = None     # cached resolution log (mns brain handover)


@dataclass(frozen=True)
class ReadingBatch:
    readings: tuple


@dataclass(frozen=True)
class Ack:
    brain: int
    reading_ids: tuple


@dataclass(frozen=True)
class SyncLog:
    """Cumulative resolution log a brain shares with its component."""
    brain: int
    resolutions: tuple


@dataclass(frozen=True)
class OperatorCommand:
    cmd: str
    args: tuple = ()


@dataclass(frozen=True)
class Resolution:
    anchor: int
    status: str            # dismissed | classified
    cls: str | None
    reason: str
    tick: int
    cells: tuple[int, ...]


@dataclass
class AnchorState:
    """One tracked candidate, keyed by its anchor cell."""
    anchor: int
    created: int
    cells: tuple[int, ...]
    status: str = "suspected"
    # evidence: (reading_id, cell) -> (kind, loglik triple); union-mergeable
    evidence: dict = field(default_factory=dict)

    def class_logp(self) -> np.ndarray:
        logp = np.zeros(len(cfg.THREAT_CLASSES))
        for _, ll in self.evidence.values():
            logp = logp + np.asarray(ll)
        return fusion._normalize_logp(logp)

    def contact_seen(self) -> bool:
        return any(kind in cfg.CONTACT_KINDS for kind, _ in self.evidence.values())

    def top_class(self) -> tuple[str, float]:
        logp = self.class_logp()
        i = int(np.argmax(logp))
        return cfg.THREAT_CLASSES[i], float(np.exp(logp[i]))


@dataclass(frozen=True)
class Need:
    key: str
    kind: str                     # task kind, or "spec_scan" (gpr or emi)
    anchor: int
    target_cells: tuple[int, ...]
    priority: tuple


class Coordinator:
    """The coordination brain for one node.

    Pure step functions: the engine feeds (tick, inbox, component) and sends
    whatever messages are returned. All state lives here so a node can be
    elected brain at any time.
    """

    def __init__(self, node: int, scenario: Scenario,
                 mission_cfg: cfg.MissionConfig, roster: dict[int, str],
                 log=None, mode: str = "centralized"):
        self.node = node
        self.grid = scenario.grid
        self.cfg = mission_cfg
        self.models = scenario.fleet_config.sensors
        self.roster = dict(roster)           # robot node -> kind
        self.mode = mode
        self.log = log or (lambda record: None)

        n = self.grid.n_cells
        self.heatmap = fusion.ThreatHeatmap.from_grid(self.grid)
        self.integrated: set = set()
        self.covered = np.zeros(n, dtype=bool)
        self.vision_hits = np.zeros(n, dtype=np.int32)
        self.spec_scanned = np.zeros(n, dtype=bool)   # any GPR/EMI coverage
        self.xrb_count = np.zeros(n, dtype=np.int32)
        self.resolved_mask = np.zeros(n, dtype=bool)

        self.reachable = reachable_mask(self.grid, scenario.deploy_cell)
        self.reachable_total = int(self.reachable.sum())
        self.ground_reachable = path_distance(
            self.grid, scenario.deploy_cell, "LUGV") >= 0
        self.regions = self._build_regions()

        self.anchors: dict[int, AnchorState] = {}
        self.resolutions: dict[int, Resolution] = {}
        self.phase = "Explore"
        self.phase_ticks: dict[str, int] = {}
        self.proposal: str | None = None     # proposed next phase (supervised)
        self.epoch = 0

        self.robot_info: dict[int, dict] = {}
        self.assignment: dict[str, int] = {}     # need key -> node
        self.assignee_of: dict[int, str] = {}    # node -> need key
        self.attempts: dict[str, int] = {}       # completed assignments per key
        self.assigned_tick: dict[str, int] = {}
        self.saw_working: dict[str, bool] = {}
        self.pins: dict[str, int] = {}           # operator retask pins

    # -- setup ------------------------------------------------------------

    def _build_regions(self) -> list[np.ndarray]:
        """Vertical stripes of reachable cells; the explore work units."""
        w, h = self.grid.width, self.grid.height
        sw = max(self.cfg.stripe_width, 1)
        cols = np.arange(w * h) % w
        regions = []
        for c0 in range(0, w, sw):
            band = (cols >= c0) & (cols < min(c0 + sw, w)) & self.reachable
            cells = np.flatnonzero(band)
            if cells.size:
                regions.append(cells)
        return regions

    # -- fused facts -------------------------------------------------------

    def coverage_fraction(self) -> float:
        if self.reachable_total == 0:
            return 1.0
        return float((self.covered & self.reachable).sum()) / self.reachable_total

    def _integrate(self, reading, tick: int) -> bool:
        if reading.id in self.integrated:
            return False
        self.integrated.add(reading.id)
        fusion.integrate_reading(self.heatmap, reading, self.models)
        cells = reading.cells
        self.covered[cells] = True
        if reading.kind in cfg.VISION_KINDS:
            det = reading.detected_cells
            self.vision_hits[det] += 1
        if reading.kind in ("GPR", "EMI"):
            self.spec_scanned[cells] = True
        if reading.kind == "XRB":
            self.xrb_count[cells] += 1
        self.log({"kind": "integrate", "t": tick, "node": self.node,
                  "reading": list(reading.id)})
        return True

    def _attach_evidence(self, reading) -> None:
        """Feature evidence feeds candidates within one cell of the detection."""
        if not reading.detections.any() or not self.anchors:
            return
        det_cells = reading.detected_cells
        w = self.grid.width
        for row, dcell in enumerate(det_cells):
            dr, dc = divmod(int(dcell), w)
            feats = reading.features[row]
            for anchor, st in self.anchors.items():
                if anchor in self.resolutions:
                    continue
                ar, ac = divmod(anchor, w)
                if abs(ar - dr) <= 1 and abs(ac - dc) <= 1:
                    key = (reading.id, int(dcell))
                    if key not in st.evidence:
                        ll = classify_evidence(feats, reading.kind,
                                               sensors=self.models)
                        st.evidence[key] = (reading.kind, tuple(float(x) for x in ll))

    # -- candidate tracking -------------------------------------------------

    def _refresh_anchors(self, tick: int) -> None:
        cands = fusion.extract_candidates(self.heatmap,
                                          self.cfg.candidate_threshold,
                                          exclude=self.resolved_mask)
        for cand in cands:
            cell_set = set(cand.cells)
            known = [a for a in self.anchors if a in cell_set]
            if known:
                for a in known:
                    st = self.anchors[a]
                    if st.status not in ("dismissed", "classified"):
                        st.cells = cand.cells
                continue
            self.anchors[cand.cell] = AnchorState(anchor=cand.cell, created=tick,
                                                  cells=cand.cells)
            self.log({"kind": "candidate_new", "t": tick, "node": self.node,
                      "anchor": cand.cell,
                      "posterior": round(cand.posterior, 9)})

    def _resolve(self, st: AnchorState, status: str, reason: str, tick: int,
                 cls: str | None = None) -> None:
        st.status = status
        res = Resolution(anchor=st.anchor, status=status, cls=cls, reason=reason,
                         tick=tick, cells=st.cells)
        self.resolutions[st.anchor] = res
        self.resolved_mask[list(st.cells)] = True
        self.resolved_mask[st.anchor] = True
        for key in (f"confirm:{st.anchor}", f"spec:{st.anchor}"):
            node = self.assignment.pop(key, None)
            if node is not None and self.assignee_of.get(node) == key:
                del self.assignee_of[node]
        self.log({"kind": "candidate_status", "t": tick, "node": self.node,
                  "anchor": st.anchor, "status": status, "reason": reason,
                  "cls": cls})

    def _finalize_unclassified(self, st: AnchorState, reason: str, tick: int,
                               posterior: float) -> None:
        if posterior >= self.cfg.candidate_threshold:
            st.status = "confirmed"
            self._resolve(st, "confirmed", reason, tick)
        else:
            self._resolve(st, "dismissed", reason, tick)

    def _adopt_resolution(self, res: Resolution) -> None:
        """Merge a resolution learned from another brain (idempotent)."""
        cur = self.resolutions.get(res.anchor)
        if cur is not None:
            keep = min((cur, res), key=lambda r: (STATUS_RANK[r.status],
                                                  r.tick, r.reason))
            self.resolutions[res.anchor] = keep
            res = keep
        else:
            self.resolutions[res.anchor] = res
        st = self.anchors.get(res.anchor)
        if st is None:
            st = AnchorState(anchor=res.anchor, created=res.tick, cells=res.cells)
            self.anchors[res.anchor] = st
        st.status = res.status
        self.resolved_mask[list(res.cells)] = True
        self.resolved_mask[res.anchor] = True

    def _judge_anchors(self, tick: int) -> None:
        """Auto-dismiss washed-out candidates, lock in classifications.

        A candidate that exhausts its manipulator visits (or can never be
        reached on the ground) while still carrying a high posterior stays a
        confirmed detection: flag it and move on rather than un-flagging a
        live hazard the contact sensors cannot resolve.
        """
        for anchor in sorted(self.anchors):
            if anchor in self.resolutions:
                continue
            st = self.anchors[anchor]
            post = self.heatmap.posterior_at(anchor)
            if post < self.cfg.dismiss_threshold:
                self._resolve(st, "dismissed", "evidence", tick)
                continue
            cls, p_cls = st.top_class()
            if st.contact_seen() and p_cls >= self.cfg.classify_gate:
                st.status = "confirmed"
                self._resolve(st, "classified", "classifier", tick, cls=cls)
                continue
            if post >= self.cfg.classify_gate and st.status == "suspected":
                st.status = "confirmed"
            if int(self.xrb_count[anchor]) >= self.cfg.max_confirm_visits:
                self._finalize_unclassified(st, "max_visits", tick, post)

    def unresolved_anchors(self) -> list[int]:
        return sorted(a for a in self.anchors if a not in self.resolutions)

    # -- phase machine -------------------------------------------------------

    def _gate_met(self) -> str | None:
        """Next phase if its entry gate is satisfied."""
        if self.phase == "Explore":
            if self.coverage_fraction() >= self.cfg.coverage_gate:
                return "SpecialisedDetection"
            # best-effort fallback: every stripe covered or attempts exhausted
            if all(self._region_done(f"explore:{i}", cells, self.covered)
                   for i, cells in enumerate(self.regions)):
                return "SpecialisedDetection"
        elif self.phase == "SpecialisedDetection":
            if all(self.spec_scanned[a] for a in self.unresolved_anchors()):
                return "Confirmation"
        elif self.phase == "Confirmation":
            if not self.unresolved_anchors() and self._sweeps_done():
                return "Complete"
        return None

    def advance_phase(self, tick: int, approved: bool = False) -> str:
        """Apply gate conditions; in supervised mode, wait for approval."""
        target = self._gate_met()
        if target is None:
            if not approved:
                self.proposal = None
            return self.phase
        if self.cfg.supervised and not approved:
            if self.proposal != target:
                self.proposal = target
                self.log({"kind": "proposal", "t": tick, "node": self.node,
                          "to_phase": target})
            return self.phase
        self._set_phase(target, tick)
        return self.phase

    def _set_phase(self, target: str, tick: int) -> None:
        if PHASE_INDEX[target] <= PHASE_INDEX[self.phase]:
            return
        self.log({"kind": "phase", "t": tick, "node": self.node,
                  "from": self.phase, "to": target})
        self.phase = target
        self.phase_ticks.setdefault(target, tick)
        self.proposal = None

    # -- needs & allocation ----------------------------------------------------

    def _region_frac(self, cells: np.ndarray, covered: np.ndarray) -> float:
        return float(covered[cells].sum()) / cells.size

    def _region_done(self, key: str, cells: np.ndarray,
                     covered: np.ndarray) -> bool:
        if self._region_frac(cells, covered) >= self.cfg.region_gate:
            return True
        return self.attempts.get(key, 0) >= self.cfg.region_max_attempts

    def compute_needs(self) -> list[Need]:
        """Outstanding work, recomputed from fused facts.

        Explore stripes come first to SUAVs; once a stripe is visually
        covered it becomes due for the low-altitude subsurface sweep
        (overlapping phase 1a/1b unless strict sequencing is on); candidate
        clusters get specialised scans and, in the confirmation phase,
        manipulator visits.
        """
        needs = []
        specialised_on = (self.phase != "Explore"
                          or not self.cfg.strict_sequencing)
        for idx, cells in enumerate(self.regions):
            ekey = f"explore:{idx}"
            explored = self._region_done(ekey, cells, self.covered)
            if not explored:
                needs.append(Need(key=ekey, kind="explore_region",
                                  anchor=int(cells[0]),
                                  target_cells=tuple(int(c) for c in cells),
                                  priority=(3, idx, 0.0)))
            gkey = f"gprsweep:{idx}"
            if specialised_on and explored \
                    and not self._region_done(gkey, cells, self.spec_scanned):
                needs.append(Need(key=gkey, kind="gpr_sweep",
                                  anchor=int(cells[0]),
                                  target_cells=tuple(int(c) for c in cells),
                                  priority=(2, idx, 0.0)))
        weights = (self.cfg.w_vision, self.cfg.w_terrain, self.cfg.w_posterior)
        for anchor in self.unresolved_anchors():
            st = self.anchors[anchor]
            cand = fusion.Candidate(id=anchor, cell=anchor,
                                    posterior=self.heatmap.posterior_at(anchor),
                                    cells=st.cells)
            score = fusion.priority_score(
                cand, float(self.grid.terrain_prior[anchor]),
                int(self.vision_hits[list(st.cells)].sum()), weights)
            if specialised_on and not self.spec_scanned[anchor]:
                needs.append(Need(key=f"spec:{anchor}", kind="spec_scan",
                                  anchor=anchor, target_cells=st.cells,
                                  priority=(1, -score, anchor)))
            if self.phase == "Confirmation":
                visit = int(self.xrb_count[anchor]) + 1
                if visit <= self.cfg.max_confirm_visits:
                    needs.append(Need(key=f"confirm:{anchor}", kind="confirm_candidate",
                                      anchor=anchor, target_cells=(anchor,),
                                      priority=(0, -score, anchor)))
        needs.sort(key=lambda nd: (nd.priority, nd.key))
        return needs

    def _sweeps_done(self) -> bool:
        return all(self._region_done(f"gprsweep:{i}", cells, self.spec_scanned)
                   for i, cells in enumerate(self.regions))

    def _eligible_kinds(self, need: Need) -> tuple[str, ...]:
        if need.kind == "spec_scan":
            return ("LUAV", "SUGV", "LUGV")
        return TASK_ELIGIBLE[need.kind]

    def _order_kind(self, need: Need, robot_kind: str) -> str:
        if need.kind == "spec_scan":
            return "gpr_sweep" if robot_kind == "LUAV" else "emi_scan"
        return need.kind

    def allocate_tasks(self, tick: int, component) -> list[tuple[int, TaskOrder]]:
        """Greedy assignment: priority order, nearest eligible idle robot."""
        orders: list[tuple[int, TaskOrder]] = []
        members = set(component) if component is not None else set(self.roster)
        needs = self.compute_needs()
        need_keys = {nd.key for nd in needs}

        # drop assignments whose need vanished or whose robot is gone/stale
        for key in sorted(self.assignment):
            node = self.assignment[key]
            info = self.robot_info.get(node)
            stale = (info is None or tick - info["tick"] > self.cfg.stale_timeout
                     or node not in members)
            finished = key not in need_keys
            if finished or stale:
                del self.assignment[key]
                if self.assignee_of.get(node) == key:
                    del self.assignee_of[node]
                if finished and not stale:
                    orders.append((node, TaskOrder(
                        key=key, kind="revoke", target_cells=(), anchor=0,
                        brain=self.node, tick=tick, revoke=True)))

        # robots that finished an assignment: count the attempt. The grace
        # window covers orders finished between allocation passes (the brain
        # may never have seen the robot working the key).
        grace = self.cfg.alloc_interval + 3
        for node, info in sorted(self.robot_info.items()):
            key = self.assignee_of.get(node)
            if key is None:
                continue
            if info["task_key"] == key:
                self.saw_working[key] = True
            elif info["idle"] and (self.saw_working.get(key) or
                                   info["tick"] >= self.assigned_tick.get(key, 0)
                                   + grace):
                self.attempts[key] = self.attempts.get(key, 0) + 1
                self.saw_working.pop(key, None)
                self.assignment.pop(key, None)
                self.assignee_of.pop(node, None)

        idle = []
        for node, info in sorted(self.robot_info.items()):
            if node not in members or node in self.assignee_of:
                continue
            if tick - info["tick"] > self.cfg.stale_timeout:
                continue
            if info["idle"] and info["battery"] > 0.0:
                idle.append(node)

        dist_fields: dict[int, np.ndarray] = {}

        def dist_to(node: int, cells: tuple[int, ...]) -> int:
            if node not in dist_fields:
                start = self.robot_info[node]["cell"]
                dist_fields[node] = path_distance(self.grid, start,
                                                  self.roster[node])
            dists = dist_fields[node][list(cells)]
            dists = dists[dists >= 0]
            return int(dists.min()) if dists.size else -1

        for need in needs:
            if need.key in self.assignment:
                continue
            kinds = self._eligible_kinds(need)
            pinned = self.pins.get(need.key)
            best = None
            for node in idle:
                if self.roster[node] not in kinds:
                    continue
                if pinned is not None and node != pinned:
                    continue
                d = dist_to(node, need.target_cells)
                if d < 0:
                    continue
                cand = (d, node)
                if best is None or cand < best:
                    best = cand
            if best is None:
                if need.kind == "confirm_candidate" and \
                        self._confirm_unreachable(need, members):
                    st = self.anchors.get(need.anchor)
                    if st is not None and need.anchor not in self.resolutions:
                        self._finalize_unclassified(
                            st, "unreachable", tick,
                            self.heatmap.posterior_at(need.anchor))
                continue
            node = best[1]
            idle.remove(node)
            self.assignment[need.key] = node
            self.assignee_of[node] = need.key
            self.assigned_tick[need.key] = tick
            self.pins.pop(need.key, None)
            order = TaskOrder(key=need.key,
                              kind=self._order_kind(need, self.roster[node]),
                              target_cells=need.target_cells,
                              anchor=need.anchor, brain=self.node, tick=tick)
            orders.append((node, order))
            self.log({"kind": "task_assign", "t": tick, "node": self.node,
                      "key": need.key, "task_kind": order.kind, "robot": node})
        return orders

    def _confirm_unreachable(self, need: Need, members) -> bool:
        """True when the anchor is statically unreachable on the ground."""
        return not bool(self.ground_reachable[need.anchor])

    # -- operator ---------------------------------------------------------------

    def handle_operator_command(self, command: OperatorCommand, tick: int) -> None:
        cmd, args = command.cmd, command.args
        self.log({"kind": "operator", "t": tick, "node": self.node,
                  "cmd": cmd, "args": list(args)})
        if cmd == "approve_phase":
            if self.proposal is not None:
                self._set_phase(self.proposal, tick)
            elif self.phase == "SpecialisedDetection":
                # documented override: operator may force Confirmation
                self._set_phase("Confirmation", tick)
            else:
                raise InvalidCommand("no phase proposal pending")
        elif cmd == "dismiss_candidate":
            st = self._known_anchor(args)
            self._resolve(st, "dismissed", "operator", tick)
        elif cmd == "confirm_candidate":
            st = self._known_anchor(args)
            if st.status == "suspected":
                st.status = "confirmed"
        elif cmd == "retask":
            node, key = int(args[0]), str(args[1])
            if node not in self.roster:
                raise InvalidCommand(f"unknown robot node {node}")
            needs = {nd.key: nd for nd in self.compute_needs()}
            if key not in needs:
                raise InvalidCommand(f"unknown task {key!r}")
            if self.roster[node] not in self._eligible_kinds(needs[key]):
                raise InvalidCommand(
                    f"{self.roster[node]} not eligible for {needs[key].kind}")
            self.pins[key] = node
            old = self.assignment.pop(key, None)
            if old is not None:
                self.assignee_of.pop(old, None)
            stale_key = self.assignee_of.pop(node, None)
            if stale_key is not None:
                self.assignment.pop(stale_key, None)
        else:
            raise InvalidCommand(f"unknown operator command {cmd!r}")

    def _known_anchor(self, args) -> AnchorState:
        anchor = int(args[0])
        st = self.anchors.get(anchor)
        if st is None or st.status in ("dismissed", "classified"):
            raise InvalidCommand(f"no active candidate {anchor}")
        return st

    # -- step functions -----------------------------------------------------------

    def control_step(self, tick: int, messages, component) -> list:
        """Sub-step 3: statuses, operator commands, task allocation."""
        out = []
        for msg in messages:
            if msg.kind == "status":
                rep: StatusReport = msg.payload
                self.robot_info[rep.node] = {
                    "tick": rep.tick, "pose": rep.pose, "cell": rep.nav_cell,
                    "battery": rep.battery, "idle": rep.idle,
                    "task_key": rep.task_key}
                if rep.sync:
                    for res in rep.sync:
                        self._adopt_resolution(res)
            elif msg.kind == "operator_cmd":
                try:
                    self.handle_operator_command(msg.payload, tick)
                except InvalidCommand:
                    pass     # forwarded commands fail silently at the brain
        if self.phase != "Complete" and tick % self.cfg.alloc_interval == 0:
            for node, order in self.allocate_tasks(tick, component):
                out.append((node, "task", order))
        return out

    def fusion_step(self, tick: int, messages, component) -> list:
        """Sub-step 6: integrate readings, refresh candidates, run gates."""
        out = []
        new_readings = []
        acked: dict[int, list] = {}
        for msg in messages:
            if msg.kind != "reading":
                continue
            batch: ReadingBatch = msg.payload
            ids = []
            for reading in batch.readings:
                if self._integrate(reading, tick):
                    new_readings.append(reading)
                ids.append(reading.id)
            if ids:
                acked.setdefault(msg.src, []).extend(ids)
        if new_readings:
            self._refresh_anchors(tick)
            for reading in new_readings:
                self._attach_evidence(reading)
        self._judge_anchors(tick)
        self.advance_phase(tick)
        for src in sorted(acked):
            out.append((src, "mns_control",
                        Ack(brain=self.node, reading_ids=tuple(acked[src]))))
        if self.mode == "mns" and self.resolutions and tick % 10 == 0:
            blob = SyncLog(brain=self.node, resolutions=self.sync_blob())
            for member in sorted(component or ()):
                if member != self.node and member in self.roster:
                    out.append((member, "mns_control", blob))
        return out

    # -- snapshots ----------------------------------------------------------------

    def sync_blob(self) -> tuple:
        return tuple(self.resolutions[a] for a in sorted(self.resolutions))

    def candidate_snapshot(self) -> list[dict]:
        snap = []
        for anchor in sorted(self.anchors):
            st = self.anchors[anchor]
            cls, p_cls = st.top_class()
            snap.append({"id": anchor, "cell": anchor,
                         "posterior": round(self.heatmap.posterior_at(anchor), 6),
                         "status": st.status, "cls": cls,
                         "cls_p": round(p_cls, 6),
                         "visits": int(self.xrb_count[anchor])})
        return snap
