"""Pure numpy/Python kernel implementations.

These are the fallback twins of the compiled routines in ``_speedups.pyx``.
Both backends must return bit-identical results: same float expressions,
same iteration order (row-major), same tie-breaking. Keep the two files in
lockstep when touching either.
"""

from __future__ import annotations

from collections import deque

import numpy as np

# 8-connected neighbourhood in (row, col) lexicographic order. BFS expands
# neighbours in exactly this order; first discovery wins, which implements
# the (row, then column) tie-break.
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
                    (0, 1), (1, -1), (1, 0), (1, 1))


def cover_segment(x0: float, y0: float, x1: float, y1: float, radius: float,
                  width: int, height: int, indoor: np.ndarray) -> np.ndarray:
    """Cells swept by a sensor moving from (x0,y0) to (x1,y1).

    A cell is covered when its centre lies within radius+0.5 of the segment
    AND its indoor flag matches the flag under the nearest segment point:
    the sensor sees what it overflies, and walls occlude the other domain.
    Returns flat cell indices in row-major order.
    """
    r = radius + 0.5
    c_lo = max(int(np.floor(min(x0, x1) - r)), 0)
    c_hi = min(int(np.ceil(max(x0, x1) + r)), width - 1)
    r_lo = max(int(np.floor(min(y0, y1) - r)), 0)
    r_hi = min(int(np.ceil(max(y0, y1) + r)), height - 1)
    if c_lo > c_hi or r_lo > r_hi:
        return np.empty(0, dtype=np.int64)

    rows, cols = np.meshgrid(np.arange(r_lo, r_hi + 1), np.arange(c_lo, c_hi + 1),
                             indexing="ij")
    px = cols + 0.5
    py = rows + 0.5
    abx = x1 - x0
    aby = y1 - y0
    denom = abx * abx + aby * aby
    apx = px - x0
    apy = py - y0
    if denom > 0.0:
        t = np.clip((apx * abx + apy * aby) / denom, 0.0, 1.0)
    else:
        t = np.zeros_like(apx)
    dx = apx - t * abx
    dy = apy - t * aby
    d2 = dx * dx + dy * dy
    srow = np.clip(np.floor(y0 + t * aby).astype(np.int64), 0, height - 1)
    scol = np.clip(np.floor(x0 + t * abx).astype(np.int64), 0, width - 1)
    keep = (d2 <= r * r) & (indoor[rows, cols] == indoor[srow, scol])
    return (rows[keep] * width + cols[keep]).astype(np.int64)


def bfs_dists(traversable: np.ndarray, width: int, height: int,
              start: int) -> np.ndarray:
    """8-connected hop distances from ``start`` (-1 where unreachable)."""
    trav = traversable.reshape(height, width).astype(bool)
    dist = np.full(height * width, -1, dtype=np.int32)
    if not trav.flat[start]:
        return dist
    dist[start] = 0
    frontier = np.zeros((height, width), dtype=bool)
    frontier.flat[start] = True
    reached = frontier.copy()
    d = 0
    while frontier.any():
        d += 1
        grown = np.zeros((height, width), dtype=bool)
        grown[:-1, :-1] |= frontier[1:, 1:]
        grown[:-1, :] |= frontier[1:, :]
        grown[:-1, 1:] |= frontier[1:, :-1]
        grown[:, :-1] |= frontier[:, 1:]
        grown[:, 1:] |= frontier[:, :-1]
        grown[1:, :-1] |= frontier[:-1, 1:]
        grown[1:, :] |= frontier[:-1, :]
        grown[1:, 1:] |= frontier[:-1, :-1]
        frontier = grown & trav & ~reached
        dist.reshape(height, width)[frontier] = d
        reached |= frontier
    return dist


def bfs_path(traversable: np.ndarray, width: int, height: int,
             start: int, goal: int):
    """Shortest 8-connected path start..goal as flat indices, or None.

    Ties broken by expanding neighbours in NEIGHBOR_OFFSETS order, i.e.
    (row, then column) ordering.
    """
    trav = traversable
    if not trav[start] or not trav[goal]:
        return None
    if start == goal:
        return np.array([start], dtype=np.int64)
    parent = np.full(width * height, -1, dtype=np.int64)
    parent[start] = start
    q = deque([start])
    found = False
    while q:
        cur = q.popleft()
        cr, cc = divmod(cur, width)
        for dr, dc in NEIGHBOR_OFFSETS:
            nr = cr + dr
            nc = cc + dc
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            nxt = nr * width + nc
            if parent[nxt] >= 0 or not trav[nxt]:
                continue
            parent[nxt] = cur
            if nxt == goal:
                found = True
                q.clear()
                break
            q.append(nxt)
    if not found:
        return None
    path = [goal]
    while path[-1] != start:
        path.append(int(parent[path[-1]]))
    path.reverse()
    return np.array(path, dtype=np.int64)
