"""Mission metrics: a streaming reducer over event-log records.

The same reducer instance backs the live run and `replay`, so the two are
exactly equal by construction: metrics are pure functions of the event log.
Detection quality is scored at candidate level — a candidate anchor within
one cell (Chebyshev) of a true threat counts as a hit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleReports
from .world import reachable_mask, scenario_from_dict

REPORT_SCHEMA = 1


@dataclass
class MetricsReducer:
    scenario: object = None
    reachable: np.ndarray | None = None
    covered: np.ndarray | None = None
    end_tick: int = 0
    completed: bool = False
    aborted: bool = False
    phase_ticks: dict = field(default_factory=dict)
    candidates: dict = field(default_factory=dict)   # anchor -> record
    readings_produced: int = 0
    integrated_ids: set = field(default_factory=set)
    net_counters: dict = field(default_factory=dict)
    robots_failed: set = field(default_factory=set)
    operator_commands: int = 0
    task_assignments: int = 0
    coverage_curve: list = field(default_factory=list)
    _next_sample: int = 0

    def consume(self, record: dict) -> None:
        kind = record.get("kind")
        t = int(record.get("t", 0))
        self.end_tick = max(self.end_tick, t)
        if kind == "header":
            self.scenario = scenario_from_dict(record["scenario"])
            grid = self.scenario.grid
            self.reachable = reachable_mask(grid, self.scenario.deploy_cell)
            self.covered = np.zeros(grid.n_cells, dtype=bool)
        elif kind == "reading":
            self.readings_produced += 1
            self.covered[record["cells"]] = True
            if t >= self._next_sample:
                self.coverage_curve.append([t, round(self.coverage_fraction(), 6)])
                self._next_sample = t + 100
        elif kind == "integrate":
            self.integrated_ids.add(tuple(record["reading"]))
        elif kind == "phase":
            self.phase_ticks.setdefault(record["to"], t)
        elif kind == "candidate_new":
            self.candidates.setdefault(record["anchor"],
                                       {"status": "suspected", "cls": None,
                                        "tick": t})
        elif kind == "candidate_status":
            cur = self.candidates.setdefault(record["anchor"],
                                             {"status": "suspected", "cls": None,
                                              "tick": t})
            new = {"status": record["status"], "cls": record.get("cls"),
                   "tick": t}
            # precedence when split brains disagree: classified > confirmed
            # > dismissed; first terminal of equal rank wins
            rank = {"classified": 0, "confirmed": 1, "dismissed": 2}
            if cur["status"] not in rank:
                cur.update(new)
            elif rank.get(new["status"], 9) < rank[cur["status"]]:
                cur.update(new)
        elif kind == "task_assign":
            self.task_assignments += 1
        elif kind == "robot_fail":
            self.robots_failed.add(record["robot"])
        elif kind == "operator":
            self.operator_commands += 1
        elif kind == "end":
            self.completed = bool(record["completed"])
            self.aborted = bool(record.get("aborted", False))
            self.net_counters = dict(record.get("net", {}))

    def coverage_fraction(self) -> float:
        total = int(self.reachable.sum())
        if total == 0:
            return 1.0
        return float((self.covered & self.reachable).sum()) / total

    # -- scoring ---------------------------------------------------------------

    def _match(self, anchor: int, cell: int) -> bool:
        w = self.scenario.grid.width
        ar, ac = divmod(anchor, w)
        tr, tc = divmod(cell, w)
        return abs(ar - tr) <= 1 and abs(ac - tc) <= 1

    def report(self, *, seed: int | None = None, mode: str | None = None) -> dict:
        threats = self.scenario.threats
        active = {a: c for a, c in self.candidates.items()
                  if c["status"] != "dismissed"}
        hits = {t.id: any(self._match(a, t.cell) for a in active)
                for t in threats}
        surface = [t for t in threats if t.depth == 0.0]
        matched_anchors = sum(
            1 for a in active if any(self._match(a, t.cell) for t in threats))

        classified = [(a, c) for a, c in self.candidates.items()
                      if c["status"] == "classified"]
        cls_scored = []
        for a, c in classified:
            near = [t for t in threats if self._match(a, t.cell)]
            if near:
                cls_scored.append(c["cls"] == near[0].cls)

        sent = self.net_counters.get("sent", 0)
        delivered = self.net_counters.get("delivered", 0)
        recall = (sum(hits.values()) / len(threats)) if threats else None
        recall_surface = (sum(hits[t.id] for t in surface) / len(surface)
                          if surface else None)
        precision = (matched_anchors / len(active)
                     if (threats and active) else None)
        return {
            "schema_version": REPORT_SCHEMA,
            "seed": self.scenario.seed if seed is None else seed,
            "mode": self.scenario.controller_mode if mode is None else mode,
            "completed": self.completed,
            "aborted": self.aborted,
            "end_tick": self.end_tick,
            "phase_ticks": dict(sorted(self.phase_ticks.items())),
            "coverage_final": round(self.coverage_fraction(), 6),
            "recall": recall,
            "recall_surface": recall_surface,
            "precision": precision,
            "false_candidates": (len(active) - matched_anchors),
            "classification": {
                "classified": len(classified),
                "scored": len(cls_scored),
                "accuracy": (sum(cls_scored) / len(cls_scored)
                             if cls_scored else None),
            },
            "candidates": {
                "created": len(self.candidates),
                "dismissed": sum(1 for c in self.candidates.values()
                                 if c["status"] == "dismissed"),
                "classified": len(classified),
            },
            "threats": {"total": len(threats), "surface": len(surface)},
            "messages": {
                **{k: int(v) for k, v in sorted(self.net_counters.items())},
                "delivery_rate": (delivered / sent if sent else None),
            },
            "readings": {
                "produced": self.readings_produced,
                "integrated_unique": len(self.integrated_ids),
            },
            "robots_failed": len(self.robots_failed),
            "operator_commands": self.operator_commands,
            "task_assignments": self.task_assignments,
            "coverage_curve": self.coverage_curve,
        }


NUMERIC_SKIP = {"schema_version", "seed"}


def _flatten(doc: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, bool):
            out[name] = float(value)
        elif isinstance(value, (int, float)) and key not in NUMERIC_SKIP:
            out[name] = float(value)
    return out


def compare_reports(report_a: dict, report_b: dict) -> list[dict]:
    """Per-metric deltas (b - a) for two schema-compatible reports."""
    if report_a.get("schema_version") != report_b.get("schema_version"):
        raise IncompatibleReports(
            f"schema {report_a.get('schema_version')!r} vs "
            f"{report_b.get('schema_version')!r}")
    fa, fb = _flatten(report_a), _flatten(report_b)
    rows = []
    for name in sorted(set(fa) | set(fb)):
        a, b = fa.get(name), fb.get(name)
        delta = (b - a) if (a is not None and b is not None) else None
        rows.append({"metric": name, "a": a, "b": b, "delta": delta,
                     "sign": (0 if not delta else (1 if delta > 0 else -1))})
    return rows


def format_comparison(rows: list[dict]) -> str:
    lines = [f"{'metric':42s} {'a':>12s} {'b':>12s} {'delta':>12s}"]
    for row in rows:
        def fmt(v):
            return "-" if v is None else f"{v:.4g}"
        lines.append(f"{row['metric']:42s} {fmt(row['a']):>12s} "
                     f"{fmt(row['b']):>12s} {fmt(row['delta']):>12s}")
    return "\n".join(lines)


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
