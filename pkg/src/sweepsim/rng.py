"""Deterministic per-node random streams.

Every stochastic draw in a run comes from a counter-based Philox generator
keyed by (seed, node, purpose). Streams with different keys are independent,
so draws on one stream never perturb another — a robot's scan noise cannot
shift the network loss sequence.
"""

from __future__ import annotations

import numpy as np

_PURPOSES = {"scan": 1, "net": 2, "placement": 3}


_MASK64 = 0xFFFFFFFFFFFFFFFF


def stream_key(seed: int, node_id: int, purpose: str) -> int:
    """64-bit subkey identifying one stream; distinct per (node, purpose)."""
    if purpose not in _PURPOSES:
        raise ValueError(f"unknown rng purpose {purpose!r}")
    # splitmix64 finalizer over the packed id, so nearby ids map far apart
    z = ((node_id << 8) | _PURPOSES[purpose]) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def rng_stream(seed: int, node_id: int, purpose: str) -> np.random.Generator:
    """Independent deterministic stream for (seed, node, purpose)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream_key(seed, node_id, purpose)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
