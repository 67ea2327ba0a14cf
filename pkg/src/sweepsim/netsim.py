"""Lossy mesh-network simulation.

Connectivity is a symmetric disk graph over node positions, rebuilt every
tick. Messages advance one hop per base_latency ticks along the current
shortest route, with per-hop Bernoulli loss; routes are recomputed from the
message's current node every tick, so delivery survives any link churn that
keeps the graph connected. A message with no route to its destination is
parked and retried until its ttl runs out (ttl decrements once per alive
tick).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import NetConfig

BROADCAST = -1

MSG_KINDS = ("status", "reading", "map_delta", "task", "mns_control",
             "operator_cmd")


@dataclass
class Message:
    id: int
    src: int
    dst: int                  # node id or BROADCAST
    kind: str
    payload: Any
    sent_tick: int
    ttl: int
    size: int = 0
    at: int = field(default=-1)          # current node
    last_hop_tick: int = field(default=-1)

    def __post_init__(self):
        if self.at < 0:
            self.at = self.src
        if self.last_hop_tick < 0:
            self.last_hop_tick = self.sent_tick


@dataclass(frozen=True)
class Topology:
    nodes: tuple[int, ...]
    adj: dict           # node -> tuple of neighbours, ascending

    def neighbours(self, node: int) -> tuple[int, ...]:
        return self.adj.get(node, ())

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adj.get(a, ())


def rebuild_topology(poses: dict[int, tuple[float, float]], config: NetConfig,
                     dead: frozenset = frozenset(),
                     blackout: frozenset = frozenset()) -> Topology:
    """Disk graph over node positions.

    `dead` nodes are removed entirely (failed robots); `blackout` nodes keep
    existing but lose all their links (comms faults).
    """
    nodes = tuple(sorted(n for n in poses if n not in dead))
    r2 = config.radio_range * config.radio_range
    adj = {n: [] for n in nodes}
    for i, a in enumerate(nodes):
        ax, ay = poses[a]
        for b in nodes[i + 1:]:
            if a in blackout or b in blackout:
                continue
            bx, by = poses[b]
            dx = ax - bx
            dy = ay - by
            if dx * dx + dy * dy <= r2:
                adj[a].append(b)
                adj[b].append(a)
    return Topology(nodes=nodes, adj={n: tuple(sorted(v)) for n, v in adj.items()})


def route(topology: Topology, src: int, dst: int) -> list[int] | None:
    """Shortest hop path src..dst (BFS, ties to the smallest next node id)."""
    if src not in topology.adj or dst not in topology.adj:
        return None
    if src == dst:
        return []
    parent = {src: src}
    q = deque([src])
    while q:
        cur = q.popleft()
        for nxt in topology.neighbours(cur):   # ascending id = tie-break
            if nxt in parent:
                continue
            parent[nxt] = cur
            if nxt == dst:
                path = [dst]
                while path[-1] != src:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            q.append(nxt)
    return None


def partitions(topology: Topology) -> list[list[int]]:
    """Connected components, each sorted by node id, ordered by smallest member."""
    seen = set()
    comps = []
    for start in topology.nodes:
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        q = deque([start])
        while q:
            cur = q.popleft()
            for nxt in topology.neighbours(cur):
                if nxt not in seen:
                    seen.add(nxt)
                    comp.append(nxt)
                    q.append(nxt)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: c[0])
    return comps


def broadcast(src: int, topology: Topology,
              rng: np.random.Generator | None = None,
              p_link_loss: float = 0.0) -> set[int]:
    """Flood from src with duplicate suppression.

    Lossless: reaches exactly src's connected component. Lossy: each edge
    transmission is an independent Bernoulli trial; a node joins the flood
    on its first successful receipt and re-transmits once.
    """
    if src not in topology.adj:
        return {src}
    reached = {src}
    frontier = [src]
    while frontier:
        nxt_frontier = []
        for node in sorted(frontier):
            for nb in topology.neighbours(node):
                if nb in reached:
                    continue
                if p_link_loss > 0.0 and rng is not None \
                        and rng.random() < p_link_loss:
                    continue
                reached.add(nb)
                nxt_frontier.append(nb)
        frontier = nxt_frontier
    return reached


def deliver(in_flight: list[Message], topology: Topology,
            rng: np.random.Generator, tick: int, config: NetConfig,
            p_link_loss: float | None = None):
    """Advance every in-flight message by at most one hop.

    Returns (delivered, still_in_flight, dropped) where dropped entries are
    (message, reason) with reason in {"loss", "ttl", "dead"}. Messages are
    processed in id order so the loss draws are reproducible.
    """
    p_loss = config.p_link_loss if p_link_loss is None else p_link_loss
    delivered: list[Message] = []
    still: list[Message] = []
    dropped: list[tuple[Message, str]] = []
    # component labels let parked messages skip the BFS; routes are shared
    # across messages with the same (position, destination)
    comp_of: dict[int, int] = {}
    for comp in partitions(topology):
        for node in comp:
            comp_of[node] = comp[0]
    route_cache: dict[tuple[int, int], list[int] | None] = {}
    for msg in sorted(in_flight, key=lambda m: m.id):
        if msg.at not in topology.adj:
            dropped.append((msg, "dead"))
            continue
        msg.ttl -= 1
        if tick - msg.last_hop_tick >= config.base_latency \
                and comp_of.get(msg.at) == comp_of.get(msg.dst):
            key = (msg.at, msg.dst)
            path = route_cache.get(key)
            if key not in route_cache:
                path = route(topology, msg.at, msg.dst)
                route_cache[key] = path
            if path:  # [] = already at dst
                if p_loss > 0.0 and rng.random() < p_loss:
                    dropped.append((msg, "loss"))
                    continue
                msg.at = path[1]
                msg.last_hop_tick = tick
        if msg.at == msg.dst:
            delivered.append(msg)
        elif msg.ttl <= 0:
            dropped.append((msg, "ttl"))
        else:
            still.append(msg)
    return delivered, still, dropped


class MeshNet:
    """Stateful wrapper binding message ids, counters and the in-flight pool."""

    def __init__(self, config: NetConfig, rng: np.random.Generator,
                 trace=None):
        self.config = config
        self.rng = rng
        self.in_flight: list[Message] = []
        self.next_id = 0
        self.counters = {"sent": 0, "delivered": 0, "dropped_loss": 0,
                         "dropped_ttl": 0, "dropped_dead": 0}
        self.trace = trace   # optional callable(record: dict)

    def send(self, src: int, dst: int, kind: str, payload, tick: int,
             size: int = 0) -> Message:
        msg = Message(id=self.next_id, src=src, dst=dst, kind=kind,
                      payload=payload, sent_tick=tick, ttl=self.config.ttl,
                      size=size)
        self.next_id += 1
        self.counters["sent"] += 1
        self.in_flight.append(msg)
        if self.trace:
            self.trace({"ev": "sent", "t": tick, "id": msg.id, "src": src,
                        "dst": dst, "kind": kind, "size": size})
        return msg

    def step(self, topology: Topology, tick: int,
             p_link_loss: float | None = None) -> dict[int, list[Message]]:
        """One delivery round; returns messages grouped by destination."""
        delivered, still, dropped = deliver(self.in_flight, topology, self.rng,
                                            tick, self.config, p_link_loss)
        self.in_flight = still
        inboxes: dict[int, list[Message]] = {}
        for msg in delivered:
            self.counters["delivered"] += 1
            inboxes.setdefault(msg.dst, []).append(msg)
            if self.trace:
                self.trace({"ev": "delivered", "t": tick, "id": msg.id,
                            "src": msg.src, "dst": msg.dst, "kind": msg.kind,
                            "hops": tick - msg.sent_tick})
        for msg, reason in dropped:
            self.counters[f"dropped_{reason}"] += 1
            if self.trace:
                self.trace({"ev": "dropped", "t": tick, "id": msg.id,
                            "src": msg.src, "dst": msg.dst, "kind": msg.kind,
                            "reason": reason})
        return inboxes
