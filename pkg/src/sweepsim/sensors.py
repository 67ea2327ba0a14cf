"""Probabilistic sensor models.

Each sensor is a five-parameter curve (p_det_base, depth_decay, max_depth,
p_fp, feature_noise) coupled to threat physics through a channel gain:
induction responds to metal fraction, radar/backscatter to buried density,
spectrometry to the charge chemistry at contact, cameras to surface-laid
objects. Fusion never sees per-threat truth; it uses the marginal
p_det_eff computed against the configured threat prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import config as cfg
from . import kernels
from .errors import DegenerateModel, UnknownFeatureShape
from .world import Threat, WorldGrid

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(eq=False)
class SensorReading:
    """One scan event: covered cells, per-cell detections, feature evidence.

    features has one row per detected cell (4 channels; channels the sensor
    does not measure stay 0). true_pose_error is diagnostic only and must
    never feed fusion.
    """
    id: tuple[int, int]            # (robot node id, per-robot sequence)
    robot_id: int
    kind: str
    tick: int
    cells: np.ndarray              # int64, sorted ascending
    detections: np.ndarray         # bool, aligned with cells
    features: np.ndarray           # float64 (n_detected, 4)
    true_pose_error: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, SensorReading):
            return NotImplemented
        return (self.id == other.id and self.robot_id == other.robot_id
                and self.kind == other.kind and self.tick == other.tick
                and np.array_equal(self.cells, other.cells)
                and np.array_equal(self.detections, other.detections)
                and np.array_equal(self.features, other.features))

    @property
    def detected_cells(self) -> np.ndarray:
        return self.cells[self.detections]


def channel_gain(spec: cfg.SensorSpec, threat: Threat) -> float:
    """Couples sensor physics to threat properties (before depth decay)."""
    kind = spec.kind
    if kind == "EMI":
        return threat.metal_fraction
    if kind in cfg.VISION_KINDS:
        if threat.depth == 0.0:
            return 1.0
        if threat.depth <= cfg.SURFACE_CUE_DEPTH:
            return cfg.SURFACE_CUE_GAIN
        return 0.0
    # GPR / XRB / RAMAN: full gain inside their depth envelope
    return 1.0


def p_det(spec: cfg.SensorSpec, threat: Threat, cell=None) -> float:
    """Detection probability for one threat under one sensor.

    `cell` is accepted for terrain-dependent extensions; the default curves
    do not use it.
    """
    if threat.depth > spec.max_depth:
        return 0.0
    p = spec.p_det_base * (spec.depth_decay ** threat.depth) * channel_gain(spec, threat)
    return min(max(p, 0.0), 1.0)


def _gain_at_depth(spec: cfg.SensorSpec, depth: float, metal: float) -> float:
    if depth > spec.max_depth:
        return 0.0
    if spec.kind == "EMI":
        g = metal
    elif spec.kind in cfg.VISION_KINDS:
        if depth == 0.0:
            g = 1.0
        elif depth <= cfg.SURFACE_CUE_DEPTH:
            g = cfg.SURFACE_CUE_GAIN
        else:
            g = 0.0
    else:
        g = 1.0
    return spec.p_det_base * (spec.depth_decay ** depth) * g


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _integrate_depth(spec: cfg.SensorSpec, d0: float, d1: float,
                     metal: float) -> float:
    """Mean of p_det over depth ~ U(d0, d1), split at gain discontinuities."""
    if d1 <= d0:
        return _gain_at_depth(spec, d0, metal)
    breaks = sorted({d0, d1} | {b for b in (cfg.SURFACE_CUE_DEPTH, spec.max_depth)
                                if d0 < b < d1})
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        x = 0.5 * (b - a) * _GL_NODES + 0.5 * (b + a)
        fx = np.array([_gain_at_depth(spec, xi, metal) for xi in x])
        total += 0.5 * (b - a) * float(np.dot(_GL_WEIGHTS, fx))
    return total / (d1 - d0)


@lru_cache(maxsize=256)
def effective_detection_prob(spec: cfg.SensorSpec) -> float:
    """p_det marginalised over the configured threat-class prior.

    This is what fusion uses as its detection likelihood: controllers never
    peek at per-threat ground truth, so the update model is deliberately
    mismatched with the generator at the individual-threat level.
    """
    total = 0.0
    for name, weight in cfg.CLASS_MIX.items():
        prof = cfg.CLASS_PROFILES[name]
        surface = _gain_at_depth(spec, 0.0, prof.metal_mean)
        buried = _integrate_depth(spec, *prof.depth_range, metal=prof.metal_mean)
        total += weight * (prof.p_surface * surface + (1.0 - prof.p_surface) * buried)
    return min(max(total, 0.0), 1.0)


def likelihood_ratio(spec: cfg.SensorSpec, detected: bool,
                     p_det_eff: float | None = None,
                     eps: float | None = None) -> float:
    """Log-odds contribution of one cell observation.

    Positive for detections when the sensor is informative (p_det_eff > p_fp),
    negative for non-detections. p_fp of exactly 0 or 1 has no finite
    log-odds; callers must opt into an explicit clamp via eps.
    """
    p_fp = spec.p_fp
    if p_fp <= 0.0 or p_fp >= 1.0:
        if eps is None:
            raise DegenerateModel(
                f"{spec.kind}: p_fp={p_fp} yields infinite log-odds "
                "(pass eps to clamp)")
        p_fp = min(max(p_fp, eps), 1.0 - eps)
    pd = effective_detection_prob(spec) if p_det_eff is None else p_det_eff
    if eps is not None:
        pd = min(max(pd, eps), 1.0 - eps)
    if detected:
        return math.log(pd / p_fp)
    return math.log((1.0 - pd) / (1.0 - p_fp))


def channel_truth(threat: Threat) -> np.ndarray:
    """Noise-free feature vector a sensor suite would read off this threat."""
    prof = cfg.CLASS_PROFILES[threat.cls]
    return np.array([
        threat.metal_fraction,
        1.0 if threat.charge == "high_explosive" else 0.0,
        prof.density,
        1.0 if threat.depth == 0.0 else 0.0,
    ])


_CLUTTER = np.asarray(cfg.CLUTTER_MEANS, dtype=np.float64)


def scan(spec: cfg.SensorSpec, pose: tuple[float, float], grid: WorldGrid,
         ground_truth: dict, rng: np.random.Generator, *,
         tick: int = 0, robot_id: int = 0, reading_seq: int = 0,
         pose_to: tuple[float, float] | None = None,
         pose_sigma: tuple[float, float] = (0.1, 0.5)) -> SensorReading:
    """Simulate one scan while moving from `pose` to `pose_to` (or dwelling).

    The reported footprint is centred on the noise-corrupted pose (outdoor
    vs indoor sigma chosen by the true pose cell), so localisation error
    shifts which cells the reading claims to cover. Detection draws then use
    that footprint: per covered cell, Bernoulli(p_det) when a threat sits
    there, Bernoulli(p_fp) otherwise. Detected cells emit features from
    threat-conditioned Gaussians on the sensor's channels.
    """
    x0, y0 = pose
    x1, y1 = pose_to if pose_to is not None else pose
    true_cell = grid.cell_of_pose(x0, y0)
    sigma = pose_sigma[1] if grid.indoor[true_cell] else pose_sigma[0]
    noise = rng.normal(0.0, sigma, 2) if sigma > 0.0 else np.zeros(2)
    nx0, ny0 = x0 + noise[0], y0 + noise[1]
    nx1, ny1 = x1 + noise[0], y1 + noise[1]

    covered = kernels.cover_segment(nx0, ny0, nx1, ny1, spec.footprint_radius,
                                    grid.width, grid.height, grid.indoor_u8)
    extra = [grid.cell_of_pose(px, py) for px, py in ((nx0, ny0), (nx1, ny1))
             if 0.0 <= px < grid.width and 0.0 <= py < grid.height]
    if extra:
        covered = np.unique(np.concatenate([covered, np.array(extra, dtype=np.int64)]))

    n = covered.size
    u = rng.random(n)
    p = np.full(n, spec.p_fp)
    threat_rows = []
    for i, cell in enumerate(covered):
        t = ground_truth.get(int(cell))
        if t is not None:
            p[i] = p_det(spec, t)
            threat_rows.append((i, t))
    detections = u < p

    det_idx = np.flatnonzero(detections)
    features = np.zeros((det_idx.size, cfg.N_CHANNELS))
    if det_idx.size:
        truth_by_row = {i: t for i, t in threat_rows}
        raw = rng.standard_normal((det_idx.size, len(spec.channels)))
        for j, row in enumerate(det_idx):
            t = truth_by_row.get(int(row))
            means = channel_truth(t) if t is not None else _CLUTTER
            for k, ch in enumerate(spec.channels):
                features[j, ch] = means[ch] + spec.feature_noise * raw[j, k]

    return SensorReading(id=(robot_id, reading_seq), robot_id=robot_id,
                         kind=spec.kind, tick=tick, cells=covered,
                         detections=detections, features=features,
                         true_pose_error=float(math.hypot(*noise)))


def classify_evidence(features: np.ndarray, kind: str,
                      sensors: dict | None = None) -> np.ndarray:
    """log p(features | class) for each threat class, given sensor `kind`.

    Evaluates Gaussians on the channels this sensor measures; the class
    channel model comes from the same profiles that generate threats, with
    the sensor's feature noise folded into the sd.
    """
    table = sensors if sensors is not None else cfg.SENSOR_TABLE
    spec = table.get(kind)
    if spec is None or not spec.channels:
        raise UnknownFeatureShape(f"{kind!r} produces no classifiable evidence")
    feats = np.asarray(features, dtype=np.float64).reshape(-1)
    if feats.shape != (cfg.N_CHANNELS,):
        raise UnknownFeatureShape(
            f"expected {cfg.N_CHANNELS}-channel evidence, got shape {feats.shape}")
    out = np.empty(len(cfg.THREAT_CLASSES))
    for ci, cls in enumerate(cfg.THREAT_CLASSES):
        prof = cfg.CLASS_PROFILES[cls]
        ll = 0.0
        for ch in spec.channels:
            sd = math.sqrt(prof.channel_sd(ch) ** 2 + spec.feature_noise ** 2)
            z = (feats[ch] - prof.channel_mean(ch)) / sd
            ll += -0.5 * z * z - math.log(sd) - LOG_SQRT_2PI
        out[ci] = ll
    return out
