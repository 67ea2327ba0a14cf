import math

import numpy as np
import pytest
import scipy.stats

from sweepsim import config as cfg
from sweepsim import fusion
from sweepsim.errors import InvalidTransition
from sweepsim.sensors import SensorReading

SPEC = cfg.SensorSpec("T", 1.0, 1.0, 0.9, 1.0, 0.1, 0.1, (0,))
MODELS = {"T": SPEC}


def heatmap_of(priors):
    priors = np.asarray(priors, dtype=float)
    return fusion.ThreatHeatmap(width=priors.size, height=1,
                                prior=priors.copy(),
                                log_odds=np.asarray(fusion.logit(priors)),
                                last_update=np.full(priors.size, -1,
                                                    dtype=np.int64))


def reading(cells, detections, rid=(1, 0), tick=0, kind="T"):
    cells = np.asarray(cells, dtype=np.int64)
    det = np.asarray(detections, dtype=bool)
    return SensorReading(id=rid, robot_id=rid[0], kind=kind, tick=tick,
                         cells=cells, detections=det,
                         features=np.zeros((int(det.sum()), 4)))


def test_single_detection_hand_posterior():
    # logit(0.02) + log 8, through the sigmoid (hand-evaluated oracle)
    hm = heatmap_of([0.02, 0.02])
    fusion.integrate_reading(hm, reading([1], [True]), MODELS, p_det_eff=0.8)
    odds = (0.02 / 0.98) * 8.0
    assert hm.posterior_at(1) == pytest.approx(odds / (1 + odds), abs=1e-12)
    assert hm.posterior_at(0) == pytest.approx(0.02, abs=1e-9)
    assert hm.last_update[1] == 0 and hm.last_update[0] == -1


def test_uninformative_sensor_leaves_heatmap_unchanged():
    hm = heatmap_of([0.1, 0.2, 0.3])
    before = hm.log_odds.copy()
    fusion.integrate_reading(hm, reading([0, 1, 2], [True, False, True]),
                             MODELS, p_det_eff=0.1)   # == p_fp
    assert np.allclose(hm.log_odds, before, atol=1e-12)


def test_integration_order_independent():
    rng = np.random.default_rng(8)
    n = 40
    priors = rng.uniform(0.01, 0.2, n)
    readings = []
    for i in range(25):
        cells = np.sort(rng.choice(n, size=6, replace=False))
        readings.append(reading(cells, rng.random(6) < 0.5, rid=(1, i), tick=i))
    hm1 = heatmap_of(priors)
    hm2 = heatmap_of(priors)
    for r in readings:
        fusion.integrate_reading(hm1, r, MODELS)
    for r in reversed(readings):
        fusion.integrate_reading(hm2, r, MODELS)
    assert np.array_equal(hm1.log_odds, hm2.log_odds)


def test_oracle_equivalence_small_instances():
    rng = np.random.default_rng(42)
    for _ in range(60):
        n = int(rng.integers(4, 100))
        priors = rng.uniform(0.005, 0.4, n)
        readings = []
        for i in range(int(rng.integers(0, 50))):
            k = int(rng.integers(1, min(n, 10)))
            cells = np.sort(rng.choice(n, size=k, replace=False))
            readings.append(reading(cells, rng.random(k) < 0.4, rid=(1, i)))
        hm = heatmap_of(priors)
        for r in readings:
            fusion.integrate_reading(hm, r, MODELS, p_det_eff=0.8)
        oracle = fusion.posterior_brute_force_oracle(readings, priors, MODELS,
                                                     p_det_eff=0.8)
        assert np.max(np.abs(hm.posterior() - oracle)) < 1e-9


def test_oracle_zero_readings_is_prior():
    priors = np.array([0.02, 0.3, 0.15])
    assert np.allclose(fusion.posterior_brute_force_oracle([], priors, MODELS),
                       priors, atol=1e-12)


def test_detection_plus_symmetric_retraction_cancels():
    # sensor with symmetric likelihood ratios: p_det=0.8/p_fp=0.2 gives
    # LR+ = log 4 and LR- = log(0.2/0.8) = -log 4
    spec = cfg.SensorSpec("S", 1.0, 1.0, 0.8, 1.0, 0.2, 0.1, (0,))
    models = {"S": spec}
    hm = heatmap_of([0.07])
    fusion.integrate_reading(hm, reading([0], [True], kind="S"), models,
                             p_det_eff=0.8)
    fusion.integrate_reading(hm, reading([0], [False], rid=(1, 1), kind="S"),
                             models, p_det_eff=0.8)
    assert hm.posterior_at(0) == pytest.approx(0.07, abs=1e-12)


def test_extract_candidates_empty_below_threshold():
    hm = heatmap_of(np.full(30, 0.2))
    assert fusion.extract_candidates(hm, 0.5) == []


def test_extract_candidates_two_blobs():
    hm = fusion.ThreatHeatmap(width=10, height=10,
                              prior=np.full(100, 0.02),
                              log_odds=np.asarray(fusion.logit(
                                  np.full(100, 0.02))),
                              last_update=np.full(100, -1, dtype=np.int64))
    for cell, lo in ((11, 3.0), (12, 4.0), (77, 5.0), (78, 4.5)):
        hm.log_odds[cell] = lo
    cands = fusion.extract_candidates(hm, 0.5)
    assert len(cands) == 2
    assert [c.cell for c in cands] == [77, 12]     # posterior-descending
    assert cands[0].cells == (77, 78)


def test_extract_candidates_tie_breaks_to_lower_index():
    hm = heatmap_of(np.full(9, 0.02))
    hm.log_odds[3] = 2.0
    hm.log_odds[4] = 2.0
    cands = fusion.extract_candidates(hm, 0.5)
    assert len(cands) == 1 and cands[0].cell == 3


def test_priority_score_examples():
    cand = fusion.Candidate(id=0, cell=0, posterior=0.0)
    assert fusion.priority_score(cand, 0.0, 0) == 0.0
    cand2 = fusion.Candidate(id=1, cell=1, posterior=0.4)
    base = fusion.priority_score(cand2, 0.02, 0)
    more_vision = fusion.priority_score(cand2, 0.02, 3)
    assert more_vision - base == pytest.approx(math.log(4.0), abs=1e-12)


def test_priority_ordering_invariant_under_weight_scaling():
    rng = np.random.default_rng(3)
    cands = [(fusion.Candidate(id=i, cell=i, posterior=float(rng.random())),
              float(rng.uniform(0, 0.05)), int(rng.integers(0, 6)))
             for i in range(12)]
    base = (1.0, 5.0, 2.0)
    scaled = tuple(3.7 * w for w in base)
    order_a = sorted(range(12), key=lambda i: -fusion.priority_score(
        cands[i][0], cands[i][1], cands[i][2], base))
    order_b = sorted(range(12), key=lambda i: -fusion.priority_score(
        cands[i][0], cands[i][1], cands[i][2], scaled))
    assert order_a == order_b


def landmine_truth_features():
    prof = cfg.CLASS_PROFILES["landmine"]
    feats = np.zeros(4)
    feats[cfg.CH_METAL] = prof.metal_mean
    feats[cfg.CH_CHEM] = prof.p_high_explosive
    feats[cfg.CH_DENSITY] = prof.density
    feats[cfg.CH_VISUAL] = prof.p_surface
    return feats


def test_zero_noise_landmine_stream_classifies_landmine():
    import dataclasses
    table = {k: dataclasses.replace(v, feature_noise=0.0)
             for k, v in cfg.SENSOR_TABLE.items()}
    cand = fusion.Candidate(id=0, cell=0, posterior=0.95)
    feats = landmine_truth_features()
    for _ in range(4):
        for kind in ("XRB", "RAMAN", "EMI"):
            fusion.update_classification(cand, feats, kind, sensors=table)
            if cand.status == "classified":
                break
        if cand.status == "classified":
            break
    assert cand.status == "classified"
    cls, p = cand.top_class()
    assert cls == "landmine" and p >= 0.9
    # oracle: per-channel scipy logpdfs agree with the accumulated posterior
    expect = np.zeros(3)
    for kind in ("XRB", "RAMAN", "EMI"):
        spec = table[kind]
        for i, c in enumerate(cfg.THREAT_CLASSES):
            prof = cfg.CLASS_PROFILES[c]
            for ch in spec.channels:
                expect[i] += scipy.stats.norm.logpdf(
                    feats[ch], prof.channel_mean(ch), prof.channel_sd(ch))
    assert int(np.argmax(expect)) == cfg.THREAT_CLASSES.index("landmine")


def test_symmetric_evidence_keeps_uniform_posterior():
    cand = fusion.Candidate(id=0, cell=0, posterior=0.9)
    cand.class_logp = fusion._normalize_logp(np.zeros(3))
    cand.class_logp = fusion._normalize_logp(cand.class_logp + np.ones(3))
    assert np.allclose(cand.class_posterior(), 1 / 3)


def test_update_classification_rejects_resolved():
    cand = fusion.Candidate(id=0, cell=0, posterior=0.9)
    fusion.set_status(cand, "dismissed")
    with pytest.raises(InvalidTransition):
        fusion.update_classification(cand, landmine_truth_features(), "XRB")


def test_status_machine_edges():
    cand = fusion.Candidate(id=0, cell=0, posterior=0.9)
    fusion.set_status(cand, "confirmed")
    fusion.set_status(cand, "classified")
    with pytest.raises(InvalidTransition):
        fusion.set_status(cand, "suspected")
    cand2 = fusion.Candidate(id=1, cell=1, posterior=0.9)
    with pytest.raises(InvalidTransition):
        fusion.set_status(cand2, "classified")   # must pass through confirmed
