"""Backend equivalence: compiled kernels must match the pure fallback bit-for-bit."""

import numpy as np
import pytest

from sweepsim import kernels
from sweepsim.kernels import pyref

compiled = pytest.importorskip("sweepsim.kernels._speedups",
                               reason="compiled kernels not built")


def random_case(rng):
    w, h = int(rng.integers(3, 48)), int(rng.integers(3, 48))
    indoor = (rng.random((h, w)) < 0.3).astype(np.uint8)
    x0, y0 = rng.uniform(-2, w + 2), rng.uniform(-2, h + 2)
    if rng.random() < 0.5:
        x1, y1 = x0, y0
    else:
        x1, y1 = rng.uniform(-2, w + 2), rng.uniform(-2, h + 2)
    return w, h, indoor, (x0, y0, x1, y1), float(rng.uniform(0, 6))


def test_cover_segment_backends_identical():
    rng = np.random.default_rng(202)
    for _ in range(400):
        w, h, indoor, (x0, y0, x1, y1), r = random_case(rng)
        a = compiled.cover_segment(x0, y0, x1, y1, r, w, h, indoor)
        b = pyref.cover_segment(x0, y0, x1, y1, r, w, h, indoor)
        assert np.array_equal(a, b)


def test_cover_segment_sorted_and_in_bounds():
    rng = np.random.default_rng(7)
    for _ in range(100):
        w, h, indoor, (x0, y0, x1, y1), r = random_case(rng)
        cells = kernels.cover_segment(x0, y0, x1, y1, r, w, h, indoor)
        assert np.all(np.diff(cells) > 0)
        if cells.size:
            assert cells.min() >= 0 and cells.max() < w * h


def test_bfs_backends_identical():
    rng = np.random.default_rng(99)
    for _ in range(300):
        w, h = int(rng.integers(2, 32)), int(rng.integers(2, 32))
        trav = (rng.random(w * h) < 0.7).astype(np.uint8)
        s, g = int(rng.integers(w * h)), int(rng.integers(w * h))
        da = compiled.bfs_dists(trav, w, h, s)
        db = pyref.bfs_dists(trav, w, h, s)
        assert np.array_equal(da, db)
        pa = compiled.bfs_path(trav, w, h, s, g)
        pb = pyref.bfs_path(trav, w, h, s, g)
        if pa is None or pb is None:
            assert pa is None and pb is None
        else:
            assert np.array_equal(pa, pb)


def test_bfs_path_length_matches_dists():
    rng = np.random.default_rng(5)
    for _ in range(200):
        w, h = int(rng.integers(3, 25)), int(rng.integers(3, 25))
        trav = (rng.random(w * h) < 0.75).astype(np.uint8)
        s, g = int(rng.integers(w * h)), int(rng.integers(w * h))
        path = kernels.bfs_path(trav, w, h, s, g)
        dist = kernels.bfs_dists(trav, w, h, s)[g]
        if path is None:
            assert dist < 0 or not trav[s] or not trav[g]
        else:
            assert len(path) == dist + 1
            assert path[0] == s and path[-1] == g
            # 8-connected steps over traversable cells only
            for a, b in zip(path[:-1], path[1:]):
                ra, ca = divmod(int(a), w)
                rb, cb = divmod(int(b), w)
                assert max(abs(ra - rb), abs(ca - cb)) == 1
                assert trav[b]


def test_disk_cover_includes_centre_cell_only_at_radius_zero():
    indoor = np.zeros((9, 9), dtype=np.uint8)
    cells = kernels.cover_segment(4.5, 4.5, 4.5, 4.5, 0.0, 9, 9, indoor)
    assert cells.tolist() == [4 * 9 + 4]


def test_cover_segment_occludes_other_domain():
    # an indoor pocket beside the pass is not visible from outdoors
    indoor = np.zeros((5, 9), dtype=np.uint8)
    indoor[0:3, 4:7] = 1
    cells = kernels.cover_segment(0.5, 3.5, 8.5, 3.5, 1.0, 9, 5, indoor)
    rows_cols = {divmod(int(c), 9) for c in cells}
    assert (2, 5) not in rows_cols          # indoor cell in radius, occluded
    assert (2, 2) in rows_cols              # outdoor cell same distance
    assert (3, 5) in rows_cols              # outdoor cell under the pass
