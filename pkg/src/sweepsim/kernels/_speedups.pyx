# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel twins of ``pyref.py``.

Must stay bit-identical to the fallback: same float expressions in the same
order, row-major iteration, same BFS neighbour order. Compiled without
fp-contraction for exact IEEE agreement with numpy.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()

cdef int[8] _DR = [-1, -1, -1, 0, 0, 1, 1, 1]
cdef int[8] _DC = [-1, 0, 1, -1, 1, -1, 0, 1]


def cover_segment(double x0, double y0, double x1, double y1, double radius,
                  int width, int height, const cnp.uint8_t[:, ::1] indoor):
    cdef double r = radius + 0.5
    cdef double lo
    lo = x0 if x0 < x1 else x1
    cdef int c_lo = <int>floor(lo - r)
    lo = x0 if x0 > x1 else x1
    cdef int c_hi = <int>ceil(lo + r)
    lo = y0 if y0 < y1 else y1
    cdef int r_lo = <int>floor(lo - r)
    lo = y0 if y0 > y1 else y1
    cdef int r_hi = <int>ceil(lo + r)
    if c_lo < 0:
        c_lo = 0
    if c_hi > width - 1:
        c_hi = width - 1
    if r_lo < 0:
        r_lo = 0
    if r_hi > height - 1:
        r_hi = height - 1
    if c_lo > c_hi or r_lo > r_hi:
        return np.empty(0, dtype=np.int64)

    cdef double abx = x1 - x0
    cdef double aby = y1 - y0
    cdef double denom = abx * abx + aby * aby
    cdef double r2 = r * r
    cdef cnp.int64_t[::1] out = np.empty(
        (r_hi - r_lo + 1) * (c_hi - c_lo + 1), dtype=np.int64)
    cdef Py_ssize_t n = 0
    cdef int row, col, srow, scol
    cdef double px, py, apx, apy, t, dx, dy, d2
    for row in range(r_lo, r_hi + 1):
        for col in range(c_lo, c_hi + 1):
            px = col + 0.5
            py = row + 0.5
            apx = px - x0
            apy = py - y0
            if denom > 0.0:
                t = (apx * abx + apy * aby) / denom
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            dx = apx - t * abx
            dy = apy - t * aby
            d2 = dx * dx + dy * dy
            if d2 <= r2:
                srow = <int>floor(y0 + t * aby)
                scol = <int>floor(x0 + t * abx)
                if srow < 0:
                    srow = 0
                elif srow > height - 1:
                    srow = height - 1
                if scol < 0:
                    scol = 0
                elif scol > width - 1:
                    scol = width - 1
                if indoor[row, col] == indoor[srow, scol]:
                    out[n] = row * width + col
                    n += 1
    return np.asarray(out)[:n].copy()


def bfs_dists(const cnp.uint8_t[::1] traversable, int width, int height,
              int start):
    cdef cnp.int32_t[::1] dist = np.full(width * height, -1, dtype=np.int32)
    if not traversable[start]:
        return np.asarray(dist)
    cdef cnp.int32_t[::1] queue = np.empty(width * height, dtype=np.int32)
    cdef Py_ssize_t head = 0, tail = 0
    cdef int cur, cr, cc, nr, nc, nxt, k
    dist[start] = 0
    queue[tail] = start
    tail += 1
    while head < tail:
        cur = queue[head]
        head += 1
        cr = cur // width
        cc = cur % width
        for k in range(8):
            nr = cr + _DR[k]
            nc = cc + _DC[k]
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            nxt = nr * width + nc
            if dist[nxt] >= 0 or not traversable[nxt]:
                continue
            dist[nxt] = dist[cur] + 1
            queue[tail] = nxt
            tail += 1
    return np.asarray(dist)


def bfs_path(const cnp.uint8_t[::1] traversable, int width, int height,
             int start, int goal):
    if not traversable[start] or not traversable[goal]:
        return None
    if start == goal:
        return np.array([start], dtype=np.int64)
    cdef cnp.int64_t[::1] parent = np.full(width * height, -1, dtype=np.int64)
    cdef cnp.int32_t[::1] queue = np.empty(width * height, dtype=np.int32)
    cdef Py_ssize_t head = 0, tail = 0
    cdef int cur, cr, cc, nr, nc, nxt, k
    cdef bint found = False
    parent[start] = start
    queue[tail] = start
    tail += 1
    while head < tail and not found:
        cur = queue[head]
        head += 1
        cr = cur // width
        cc = cur % width
        for k in range(8):
            nr = cr + _DR[k]
            nc = cc + _DC[k]
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            nxt = nr * width + nc
            if parent[nxt] >= 0 or not traversable[nxt]:
                continue
            parent[nxt] = cur
            if nxt == goal:
                found = True
                break
            queue[tail] = nxt
            tail += 1
    if not found:
        return None
    path = [goal]
    cdef cnp.int64_t node = goal
    while node != start:
        node = parent[node]
        path.append(node)
    path.reverse()
    return np.array(path, dtype=np.int64)
