"""Default parameter tables.

Every number a scenario can override lives here: sensor performance curves,
threat-class profiles (used both to generate threats and as the classifier's
channel model), fleet kinematics/batteries, network knobs, and mission gates.
The tables are plain dataclasses so a scenario file can replace any field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

# Feature evidence channels, in vector order.
CH_METAL, CH_CHEM, CH_DENSITY, CH_VISUAL = 0, 1, 2, 3
N_CHANNELS = 4

TERRAINS = ("sand", "gravel", "clay", "asphalt", "concrete")

# Per-terrain prior probability that a cell hides a device. Clay/sand are
# easy digging, paved surfaces are not; all overridable per scenario.
TERRAIN_PRIOR = {
    "sand": 0.02,
    "gravel": 0.015,
    "clay": 0.02,
    "asphalt": 0.005,
    "concrete": 0.005,
}

THREAT_CLASSES = ("IED", "EO", "landmine")
CHARGES = ("high_explosive", "low_explosive")
INITIATORS = ("electrical", "mechanical", "chemical")


@dataclass(frozen=True)
class ClassProfile:
    """Threat-class channel model: generation prior and classifier likelihood.

    Channel means/sds define Gaussians the classifier evaluates; the same
    numbers drive attribute draws at scenario generation so the generative
    model and the classifier agree.
    """
    metal_mean: float
    metal_sd: float
    p_high_explosive: float
    chem_sd: float
    density: float
    density_sd: float
    p_surface: float
    visual_sd: float
    depth_range: tuple[float, float]   # buried depth, uniform
    initiator_weights: tuple[float, float, float]  # electrical/mechanical/chemical

    def channel_mean(self, channel: int) -> float:
        if channel == CH_METAL:
            return self.metal_mean
        if channel == CH_CHEM:
            return self.p_high_explosive
        if channel == CH_DENSITY:
            return self.density
        return self.p_surface

    def channel_sd(self, channel: int) -> float:
        if channel == CH_METAL:
            return self.metal_sd
        if channel == CH_CHEM:
            return self.chem_sd
        if channel == CH_DENSITY:
            return self.density_sd
        return self.visual_sd


# Defaults chosen so the three classes are separable on at least one channel:
# landmines are high-metal and buried shallow, ordnance is dense metal casing,
# improvised devices are variable-metal and often surface-laid.
CLASS_PROFILES: dict[str, ClassProfile] = {
    "IED": ClassProfile(metal_mean=0.4, metal_sd=0.25,
                        p_high_explosive=0.9, chem_sd=0.3,
                        density=0.5, density_sd=0.15,
                        p_surface=0.5, visual_sd=0.5,
                        depth_range=(0.05, 0.6),
                        initiator_weights=(0.6, 0.2, 0.2)),
    "EO": ClassProfile(metal_mean=0.7, metal_sd=0.15,
                       p_high_explosive=0.9, chem_sd=0.3,
                       density=0.8, density_sd=0.1,
                       p_surface=0.25, visual_sd=0.45,
                       depth_range=(0.05, 0.8),
                       initiator_weights=(0.2, 0.7, 0.1)),
    "landmine": ClassProfile(metal_mean=0.85, metal_sd=0.1,
                             p_high_explosive=0.6, chem_sd=0.35,
                             density=0.6, density_sd=0.1,
                             p_surface=0.05, visual_sd=0.3,
                             depth_range=(0.05, 0.3),
                             initiator_weights=(0.1, 0.8, 0.1)),
}

CLASS_MIX = {"IED": 0.5, "EO": 0.25, "landmine": 0.25}

# Feature means emitted by false-positive detections (clutter).
CLUTTER_MEANS = (0.15, 0.05, 0.2, 0.15)


@dataclass(frozen=True)
class SensorSpec:
    """Five-parameter detection curve plus footprint geometry.

    p_det(threat) = p_det_base * depth_decay**depth * channel_gain, zeroed
    beyond max_depth. channels lists which evidence channels the sensor
    measures (indices into the 4-vector).
    """
    kind: str
    footprint_radius: float     # cells
    max_depth: float            # metres; hard detection cutoff
    p_det_base: float
    depth_decay: float          # per-metre multiplier
    p_fp: float                 # false positives per cell-scan
    feature_noise: float        # sd of emitted feature evidence
    channels: tuple[int, ...]


SENSOR_TABLE: dict[str, SensorSpec] = {
    "RGB": SensorSpec("RGB", 4.0, 0.1, 0.7, 1.0, 0.01, 0.15, (CH_VISUAL,)),
    "IR": SensorSpec("IR", 4.0, 0.1, 0.6, 1.0, 0.015, 0.2, (CH_VISUAL,)),
    "HYPERSPECTRAL": SensorSpec("HYPERSPECTRAL", 3.0, 0.1, 0.75, 1.0, 0.01, 0.12,
                                (CH_VISUAL,)),
    "GPR": SensorSpec("GPR", 1.0, 1.5, 0.85, 0.55, 0.02, 0.1, (CH_DENSITY,)),
    "EMI": SensorSpec("EMI", 1.0, 0.5, 0.9, 0.5, 0.03, 0.08, (CH_METAL,)),
    "XRB": SensorSpec("XRB", 0.0, 0.3, 0.95, 0.6, 0.01, 0.05, (CH_DENSITY,)),
    "RAMAN": SensorSpec("RAMAN", 0.0, 0.05, 0.9, 1.0, 0.005, 0.05, (CH_CHEM,)),
}

# Depth below which cameras still get a partial surface cue (disturbed soil).
SURFACE_CUE_DEPTH = 0.1
SURFACE_CUE_GAIN = 0.15

VISION_KINDS = ("RGB", "IR", "HYPERSPECTRAL")
CONTACT_KINDS = ("XRB", "RAMAN")

ROBOT_KINDS = ("SUAV", "LUAV", "SUGV", "LUGV")
AERIAL_KINDS = ("SUAV", "LUAV")
GROUND_KINDS = ("SUGV", "LUGV")

# Sensor loadout per robot kind. LIDAR_NAV is navigation-only and never
# produces detections, so it has no entry in SENSOR_TABLE.
LOADOUTS = {
    "SUAV": ("RGB", "LIDAR_NAV"),
    "LUAV": ("GPR", "HYPERSPECTRAL", "IR", "RGB", "LIDAR_NAV"),
    "SUGV": ("EMI", "LIDAR_NAV"),
    "LUGV": ("XRB", "RAMAN", "EMI", "LIDAR_NAV"),
}

SENSOR_KINDS = ("RGB", "IR", "HYPERSPECTRAL", "LIDAR_NAV",
                "GPR", "EMI", "XRB", "RAMAN")


@dataclass(frozen=True)
class FleetConfig:
    counts: dict[str, int] = field(default_factory=lambda: {
        "SUAV": 2, "LUAV": 1, "SUGV": 2, "LUGV": 1})
    speeds: dict[str, float] = field(default_factory=lambda: {
        "SUAV": 10.0, "LUAV": 5.0, "SUGV": 1.5, "LUGV": 0.8})
    # SUGV ~5 h, LUGV ~half a day; UAV endurance is a design knob with
    # instantaneous battery swap at the deployment zone.
    batteries: dict[str, float] = field(default_factory=lambda: {
        "SUAV": 1500.0, "LUAV": 2400.0, "SUGV": 18000.0, "LUGV": 43200.0})
    pose_sigma_outdoor: float = 0.1    # RTK-grade positioning
    pose_sigma_indoor: float = 0.5     # SLAM-grade positioning
    arm_dwell_ticks: int = 60          # manipulator deploy time before contact scans
    sensors: dict[str, SensorSpec] = field(
        default_factory=lambda: dict(SENSOR_TABLE))


@dataclass(frozen=True)
class NetConfig:
    radio_range: float = 30.0
    p_link_loss: float = 0.05
    base_latency: int = 1              # ticks per hop
    ttl: int = 50                      # hops/ticks before a message dies
    command_centre_pos: tuple[float, float] = (1.5, 1.5)


@dataclass(frozen=True)
class MissionConfig:
    coverage_gate: float = 0.9         # Explore -> SpecialisedDetection
    region_gate: float = 0.9           # single explore region considered done
    candidate_threshold: float = 0.5   # posterior for candidate extraction
    dismiss_threshold: float = 0.2     # posterior under which a candidate dies
    classify_gate: float = 0.9         # class posterior lock-in
    max_confirm_visits: int = 4
    w_vision: float = 1.0              # priority weights
    w_terrain: float = 5.0
    w_posterior: float = 2.0
    alloc_interval: int = 5            # ticks between allocation passes
    retx_interval: int = 10            # reading retransmit period
    stale_timeout: int = 15            # ticks of silence before a robot is stale
    idle_home_timeout: int = 30        # idle ticks before rallying to base
    stripe_width: int = 8              # explore region width, cells
    sweep_spacing: int = 3             # waypoint lattice spacing for explore
    region_max_attempts: int = 2       # force-done guard for explore regions
    strict_sequencing: bool = False    # forbid 1b tasks during Explore
    supervised: bool = False           # phase gates wait for operator approval
    battery_reserve_factor: float = 1.3


DEFAULT_FLEET = FleetConfig()
DEFAULT_NET = NetConfig()
DEFAULT_MISSION = MissionConfig()


def with_overrides(cfg, **kwargs):
    """Dataclass copy with field overrides (thin wrapper over replace)."""
    return replace(cfg, **kwargs)
