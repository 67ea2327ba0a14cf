"""Threat heatmap fusion and candidate management.

Per-cell threat belief is kept as additive log-odds (naive Bayes across
readings), so integration is commutative and associative: any arrival order
of the same readings yields the same map. Candidates are connected
components of high-posterior cells walked through a
suspected -> confirmed -> classified / dismissed status machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from . import config as cfg
from .errors import InvalidTransition
from .sensors import SensorReading, classify_evidence, likelihood_ratio
from .world import WorldGrid

EPS = 1e-6
LOG_ODDS_CLAMP = 45.0   # |log-odds| cap; sigmoid(45) is 1 within float64

_LABEL_STRUCTURE = np.ones((3, 3), dtype=int)  # 8-connectivity


def logit(p: float | np.ndarray, eps: float = EPS):
    p = np.clip(p, eps, 1.0 - eps)
    return np.log(p / (1.0 - p))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(eq=False)
class ThreatHeatmap:
    width: int
    height: int
    prior: np.ndarray        # per-cell prior probability
    log_odds: np.ndarray     # current belief
    last_update: np.ndarray  # tick of last integration, -1 if never scanned

    @classmethod
    def from_grid(cls, grid: WorldGrid) -> "ThreatHeatmap":
        prior = np.clip(grid.terrain_prior, EPS, 1.0 - EPS)
        return cls(width=grid.width, height=grid.height, prior=prior.copy(),
                   log_odds=np.asarray(logit(prior), dtype=np.float64),
                   last_update=np.full(grid.width * grid.height, -1,
                                       dtype=np.int64))

    def posterior(self) -> np.ndarray:
        return sigmoid(self.log_odds)

    def posterior_at(self, cell: int) -> float:
        return float(sigmoid(self.log_odds[cell]))

    def copy(self) -> "ThreatHeatmap":
        return ThreatHeatmap(self.width, self.height, self.prior.copy(),
                             self.log_odds.copy(), self.last_update.copy())

    def __eq__(self, other):
        if not isinstance(other, ThreatHeatmap):
            return NotImplemented
        return (np.array_equal(self.log_odds, other.log_odds)
                and np.array_equal(self.prior, other.prior))


def integrate_reading(heatmap: ThreatHeatmap, reading: SensorReading,
                      models: dict, *, p_det_eff: float | None = None,
                      eps: float = EPS) -> ThreatHeatmap:
    """Add one reading's log-likelihood-ratio to every covered cell.

    Pure addition of terms that depend only on the reading itself, so
    integration commutes across readings. p_det_eff overrides the marginal
    detection probability (used by the generative-match calibration tests).
    """
    if reading.cells.size == 0:
        return heatmap
    spec = models[reading.kind]
    lr_pos = likelihood_ratio(spec, True, p_det_eff=p_det_eff, eps=eps)
    lr_neg = likelihood_ratio(spec, False, p_det_eff=p_det_eff, eps=eps)
    delta = np.where(reading.detections, lr_pos, lr_neg)
    cells = reading.cells
    heatmap.log_odds[cells] = np.clip(heatmap.log_odds[cells] + delta,
                                      -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP)
    heatmap.last_update[cells] = reading.tick
    return heatmap


def posterior_brute_force_oracle(readings, priors: np.ndarray, models: dict,
                                 *, p_det_eff: float | None = None,
                                 eps: float = EPS) -> np.ndarray:
    """Direct Bayes posterior from products of per-reading likelihoods.

    Test oracle only: independent of the log-odds path (works in probability
    space, no logarithms). Small instances.
    """
    n = priors.size
    like_threat = np.ones(n)
    like_clear = np.ones(n)
    for reading in readings:
        spec = models[reading.kind]
        p_fp = min(max(spec.p_fp, eps), 1.0 - eps)
        if p_det_eff is None:
            from .sensors import effective_detection_prob
            pd = effective_detection_prob(spec)
        else:
            pd = p_det_eff
        pd = min(max(pd, eps), 1.0 - eps)
        for cell, det in zip(reading.cells, reading.detections):
            if det:
                like_threat[cell] *= pd
                like_clear[cell] *= p_fp
            else:
                like_threat[cell] *= 1.0 - pd
                like_clear[cell] *= 1.0 - p_fp
    a = priors * like_threat
    b = (1.0 - priors) * like_clear
    return a / (a + b)


# ---------------------------------------------------------------------------
# candidates

STATUSES = ("suspected", "confirmed", "dismissed", "classified")
_ALLOWED_TRANSITIONS = {
    ("suspected", "confirmed"),
    ("suspected", "dismissed"),
    ("confirmed", "classified"),
    ("confirmed", "dismissed"),
}


def _normalize_logp(logp: np.ndarray) -> np.ndarray:
    m = float(np.max(logp))
    return logp - (m + math.log(float(np.sum(np.exp(logp - m)))))


@dataclass(eq=False)
class Candidate:
    """A spatial cluster of high-posterior cells under investigation."""
    id: int
    cell: int                       # anchor: argmax cell at creation
    posterior: float
    class_logp: np.ndarray = field(default_factory=lambda: _normalize_logp(
        np.zeros(len(cfg.THREAT_CLASSES))))
    status: str = "suspected"
    cells: tuple = ()
    contact_seen: bool = False      # an XRB/RAMAN reading contributed evidence
    visits: int = 0

    def class_posterior(self) -> np.ndarray:
        return np.exp(self.class_logp)

    def top_class(self) -> tuple[str, float]:
        i = int(np.argmax(self.class_logp))
        return cfg.THREAT_CLASSES[i], float(np.exp(self.class_logp[i]))


def set_status(candidate: Candidate, new: str) -> None:
    if new == candidate.status:
        return
    if (candidate.status, new) not in _ALLOWED_TRANSITIONS:
        raise InvalidTransition(
            f"candidate {candidate.id}: {candidate.status} -> {new}")
    candidate.status = new


def extract_candidates(heatmap: ThreatHeatmap, threshold: float = 0.5,
                       exclude: np.ndarray | None = None) -> list[Candidate]:
    """Connected components (8-way) of cells with posterior >= threshold.

    One candidate per component, anchored at the component's argmax cell
    (ties to the lowest cell index). Ordered by (posterior desc, cell asc).
    `exclude` masks cells that already belong to resolved candidates.
    """
    post = heatmap.posterior()
    hot = post >= threshold
    if exclude is not None:
        hot = hot & ~exclude
    if not hot.any():
        return []
    labels, n_comp = scipy.ndimage.label(
        hot.reshape(heatmap.height, heatmap.width), structure=_LABEL_STRUCTURE)
    labels = labels.reshape(-1)
    found = []
    for comp in range(1, n_comp + 1):
        cells = np.flatnonzero(labels == comp)       # ascending cell index
        best = cells[int(np.argmax(post[cells]))]    # first max = lowest index
        found.append((float(post[best]), int(best), tuple(int(c) for c in cells)))
    found.sort(key=lambda t: (-t[0], t[1]))
    return [Candidate(id=i, cell=cell, posterior=posterior, cells=cells)
            for i, (posterior, cell, cells) in enumerate(found)]


def priority_score(candidate: Candidate, cell_prior: float, vision_hits: int,
                   weights: tuple[float, float, float] = (1.0, 5.0, 2.0)) -> float:
    """Tasking heuristic: environment type plus vision-detection pressure."""
    w_v, w_t, w_p = weights
    return (w_v * math.log1p(vision_hits) + w_t * cell_prior
            + w_p * candidate.posterior)


def update_classification(candidate: Candidate, features: np.ndarray, kind: str,
                          *, sensors: dict | None = None,
                          classify_gate: float = 0.9) -> Candidate:
    """Fold one detection's feature evidence into the class posterior.

    Locks the candidate to `classified` once the top class clears the gate
    and at least one contact sensor (XRB/RAMAN) has contributed.
    """
    if candidate.status not in ("suspected", "confirmed"):
        raise InvalidTransition(
            f"candidate {candidate.id}: cannot add evidence while "
            f"{candidate.status}")
    ll = classify_evidence(features, kind, sensors=sensors)
    candidate.class_logp = _normalize_logp(candidate.class_logp + ll)
    if kind in cfg.CONTACT_KINDS:
        candidate.contact_seen = True
    if candidate.contact_seen and \
            float(np.max(np.exp(candidate.class_logp))) >= classify_gate:
        if candidate.status == "suspected":
            set_status(candidate, "confirmed")
        set_status(candidate, "classified")
    return candidate
