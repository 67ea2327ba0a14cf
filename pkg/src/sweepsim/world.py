"""Environment model: grid, terrain, threats, scenario generation and files.

Grids are flat row-major arrays (cell index = row*width + col). A WorldGrid
is immutable after construction; scenarios are pure functions of
(params, seed) so the same inputs always serialize to the same bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import config as cfg
from . import kernels
from .errors import (ConfigError, InfeasiblePlacement, OutOfBounds, ParseError,
                     VersionMismatch)
from .rng import rng_stream

FORMAT_VERSION = 1

TERRAIN_CODE = {name: i for i, name in enumerate(cfg.TERRAINS)}


@dataclass(frozen=True)
class Cell:
    """Single-cell view (terrain decoded to its name)."""
    terrain: str
    indoor: bool
    obstacle: bool
    terrain_prior: float


@dataclass(frozen=True)
class Threat:
    """Ground-truth explosive device.

    metal_fraction describes the container/casing; depth 0 means surface-laid.
    """
    id: int
    cls: str                # IED | EO | landmine
    charge: str             # high_explosive | low_explosive
    initiator: str          # electrical | mechanical | chemical
    metal_fraction: float
    depth: float
    cell: int

    def __post_init__(self):
        if self.depth < 0:
            raise ConfigError(f"threat {self.id}: depth must be >= 0")
        if not 0.0 <= self.metal_fraction <= 1.0:
            raise ConfigError(f"threat {self.id}: metal_fraction outside [0,1]")


class WorldGrid:
    """Immutable 2-D cell grid with terrain / indoor / obstacle layers."""

    def __init__(self, width: int, height: int, terrain: np.ndarray,
                 indoor: np.ndarray, obstacle: np.ndarray,
                 terrain_prior: np.ndarray, cell_size: float = 1.0):
        if width < 1 or height < 1:
            raise ConfigError("grid must be at least 1x1")
        n = width * height
        for name, arr in (("terrain", terrain), ("indoor", indoor),
                          ("obstacle", obstacle), ("terrain_prior", terrain_prior)):
            if arr.shape != (n,):
                raise ConfigError(f"{name} layer must have {n} cells")
        if terrain_prior.min() < 0.0 or terrain_prior.max() > 1.0:
            raise ConfigError("terrain_prior outside [0,1]")
        self.width = int(width)
        self.height = int(height)
        self.cell_size = float(cell_size)
        self.terrain = terrain.astype(np.int8)
        self.indoor = indoor.astype(bool)
        self.obstacle = obstacle.astype(bool)
        self.terrain_prior = terrain_prior.astype(np.float64)
        # traversability: ground robots are blocked by any obstacle; aircraft
        # overfly outdoor obstacles but not indoor wall/ceiling cells
        self.ground_trav = (~self.obstacle).astype(np.uint8)
        self.aerial_trav = (~(self.indoor & self.obstacle)).astype(np.uint8)
        # 2-D indoor flags for the footprint kernel (visibility domains)
        self.indoor_u8 = np.ascontiguousarray(
            self.indoor.reshape(height, width).astype(np.uint8))
        for arr in (self.terrain, self.indoor, self.obstacle, self.terrain_prior,
                    self.ground_trav, self.aerial_trav, self.indoor_u8):
            arr.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def in_bounds(self, cell: int) -> bool:
        return 0 <= cell < self.n_cells

    def check_bounds(self, cell: int) -> None:
        if not self.in_bounds(cell):
            raise OutOfBounds(f"cell {cell} outside {self.width}x{self.height} grid")

    def cell_of_pose(self, x: float, y: float) -> int:
        col = min(max(int(x), 0), self.width - 1)
        row = min(max(int(y), 0), self.height - 1)
        return row * self.width + col

    def cell_center(self, cell: int) -> tuple[float, float]:
        row, col = divmod(cell, self.width)
        return (col + 0.5, row + 0.5)

    def cell_at(self, cell: int) -> Cell:
        self.check_bounds(cell)
        return Cell(terrain=cfg.TERRAINS[self.terrain[cell]],
                    indoor=bool(self.indoor[cell]),
                    obstacle=bool(self.obstacle[cell]),
                    terrain_prior=float(self.terrain_prior[cell]))

    def trav_mask(self, robot_kind: str) -> np.ndarray:
        if robot_kind in cfg.AERIAL_KINDS:
            return self.aerial_trav
        if robot_kind in cfg.GROUND_KINDS:
            return self.ground_trav
        raise ConfigError(f"unknown robot kind {robot_kind!r}")

    def __eq__(self, other):
        if not isinstance(other, WorldGrid):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and self.cell_size == other.cell_size
                and np.array_equal(self.terrain, other.terrain)
                and np.array_equal(self.indoor, other.indoor)
                and np.array_equal(self.obstacle, other.obstacle)
                and np.array_equal(self.terrain_prior, other.terrain_prior))


def traversable(grid: WorldGrid, cell: int, robot_kind: str) -> bool:
    """Can `robot_kind` occupy `cell`? Raises OutOfBounds outside the grid."""
    grid.check_bounds(cell)
    return bool(grid.trav_mask(robot_kind)[cell])


def reachable_mask(grid: WorldGrid, seed_cell: int) -> np.ndarray:
    """Cells connected to seed_cell for aircraft; the coverage denominator."""
    dists = kernels.bfs_dists(grid.aerial_trav, grid.width, grid.height, seed_cell)
    return dists >= 0


@dataclass(frozen=True)
class ScenarioParams:
    width: int = 50
    height: int = 50
    threat_count: int = 10
    indoor_fraction: float = 0.12
    obstacle_density: float = 0.04
    deploy_size: int = 4
    controller_mode: str = "centralized"
    terrain_weights: tuple[float, ...] = (0.25, 0.2, 0.2, 0.15, 0.2)

    def validate(self) -> None:
        if self.width < 4 or self.height < 4:
            raise ConfigError("grid must be at least 4x4")
        if self.threat_count < 0:
            raise ConfigError("threat_count must be >= 0")
        if not 0.0 <= self.indoor_fraction <= 0.5:
            raise ConfigError("indoor_fraction outside [0, 0.5]")
        if not 0.0 <= self.obstacle_density <= 0.5:
            raise ConfigError("obstacle_density outside [0, 0.5]")
        if self.controller_mode not in ("centralized", "mns"):
            raise ConfigError(f"unknown controller_mode {self.controller_mode!r}")
        if len(self.terrain_weights) != len(cfg.TERRAINS):
            raise ConfigError("terrain_weights must list 5 weights")


@dataclass(frozen=True)
class Scenario:
    grid: WorldGrid
    threats: tuple[Threat, ...]
    fleet_config: cfg.FleetConfig
    net_config: cfg.NetConfig
    seed: int
    controller_mode: str
    deploy_cell: int = 0
    threat_by_cell: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_cell = {}
        for t in self.threats:
            if not self.grid.in_bounds(t.cell):
                raise ConfigError(f"threat {t.id}: cell {t.cell} out of bounds")
            if self.grid.obstacle[t.cell]:
                raise ConfigError(f"threat {t.id}: placed on an obstacle cell")
            if t.cell in by_cell:
                raise ConfigError(f"threat {t.id}: cell {t.cell} already occupied")
            by_cell[t.cell] = t
        object.__setattr__(self, "threat_by_cell", by_cell)


def ground_truth_at(scenario: Scenario, cell: int) -> Threat | None:
    """Oracle lookup for metrics; controllers must never call this."""
    scenario.grid.check_bounds(cell)
    return scenario.threat_by_cell.get(cell)


def _carve_buildings(rng, params, indoor, obstacle, terrain):
    """Place rectangular buildings: obstacle walls, one door, open interior."""
    w, h = params.width, params.height
    target = params.indoor_fraction * w * h
    placed = 0
    attempts = 0
    while placed < target and attempts < 200:
        attempts += 1
        bw = int(rng.integers(5, 11))
        bh = int(rng.integers(5, 11))
        if bw >= w - 2 or bh >= h - 2:
            continue
        c0 = int(rng.integers(1, w - bw))
        r0 = int(rng.integers(1, h - bh))
        # keep a 1-cell margin to other buildings and the deploy zone
        rr0, rr1 = max(r0 - 1, 0), min(r0 + bh + 1, h)
        cc0, cc1 = max(c0 - 1, 0), min(c0 + bw + 1, w)
        region = np.s_[rr0:rr1, cc0:cc1]
        if indoor.reshape(h, w)[region].any():
            continue
        if rr0 < params.deploy_size + 1 and cc0 < params.deploy_size + 1:
            continue
        ind2d = indoor.reshape(h, w)
        obs2d = obstacle.reshape(h, w)
        ter2d = terrain.reshape(h, w)
        ind2d[r0:r0 + bh, c0:c0 + bw] = True
        ter2d[r0:r0 + bh, c0:c0 + bw] = TERRAIN_CODE["concrete"]
        # perimeter walls, open interior
        obs2d[r0:r0 + bh, c0:c0 + bw] = False
        obs2d[r0, c0:c0 + bw] = True
        obs2d[r0 + bh - 1, c0:c0 + bw] = True
        obs2d[r0:r0 + bh, c0] = True
        obs2d[r0:r0 + bh, c0 + bw - 1] = True
        # door: non-corner perimeter cell, cleared along with its doorstep
        door_cells = []
        for c in range(c0 + 1, c0 + bw - 1):
            door_cells.append((r0, c, r0 - 1, c))
            door_cells.append((r0 + bh - 1, c, r0 + bh, c))
        for r in range(r0 + 1, r0 + bh - 1):
            door_cells.append((r, c0, r, c0 - 1))
            door_cells.append((r, c0 + bw - 1, r, c0 + bw))
        dr, dc, sr, sc = door_cells[int(rng.integers(len(door_cells)))]
        obs2d[dr, dc] = False
        if 0 <= sr < h and 0 <= sc < w and not ind2d[sr, sc]:
            obs2d[sr, sc] = False
        placed += bw * bh
    return indoor, obstacle, terrain


def generate_scenario(params: ScenarioParams, seed: int) -> Scenario:
    """Deterministic scenario from (params, seed)."""
    params.validate()
    rng = rng_stream(seed, 0, "placement")
    w, h = params.width, params.height
    n = w * h

    terrain = rng.choice(len(cfg.TERRAINS), size=n,
                         p=np.asarray(params.terrain_weights, dtype=float)
                         / sum(params.terrain_weights)).astype(np.int8)
    obstacle = rng.random(n) < params.obstacle_density
    indoor = np.zeros(n, dtype=bool)
    indoor, obstacle, terrain = _carve_buildings(rng, params, indoor, obstacle,
                                                 terrain)

    # deployment corner stays open ground
    obs2d = obstacle.reshape(h, w)
    ind2d = indoor.reshape(h, w)
    obs2d[:params.deploy_size, :params.deploy_size] = False
    ind2d[:params.deploy_size, :params.deploy_size] = False

    prior = np.array([cfg.TERRAIN_PRIOR[cfg.TERRAINS[t]] for t in terrain],
                     dtype=np.float64)
    grid = WorldGrid(w, h, terrain, indoor, obstacle, prior)

    deploy_cell = grid.cell_of_pose(params.deploy_size / 2, params.deploy_size / 2)
    deploy = np.zeros(n, dtype=bool)
    deploy.reshape(h, w)[:params.deploy_size, :params.deploy_size] = True
    free = np.flatnonzero(~obstacle & ~deploy)
    if params.threat_count > free.size:
        raise InfeasiblePlacement(
            f"{params.threat_count} threats requested but only {free.size} "
            "free cells available")

    cells = rng.choice(free, size=params.threat_count, replace=False)
    class_names = list(cfg.CLASS_MIX)
    mix = np.array([cfg.CLASS_MIX[c] for c in class_names])
    mix = mix / mix.sum()
    threats = []
    for i, cell in enumerate(cells):
        cls = class_names[int(rng.choice(len(class_names), p=mix))]
        prof = cfg.CLASS_PROFILES[cls]
        charge = ("high_explosive" if rng.random() < prof.p_high_explosive
                  else "low_explosive")
        iw = np.asarray(prof.initiator_weights, dtype=float)
        initiator = cfg.INITIATORS[int(rng.choice(3, p=iw / iw.sum()))]
        metal = float(np.clip(rng.normal(prof.metal_mean, prof.metal_sd), 0.0, 1.0))
        if rng.random() < prof.p_surface:
            depth = 0.0
        else:
            depth = float(rng.uniform(*prof.depth_range))
        threats.append(Threat(id=i, cls=cls, charge=charge, initiator=initiator,
                              metal_fraction=metal, depth=depth, cell=int(cell)))

    return Scenario(grid=grid, threats=tuple(threats),
                    fleet_config=cfg.FleetConfig(), net_config=cfg.NetConfig(),
                    seed=int(seed), controller_mode=params.controller_mode,
                    deploy_cell=deploy_cell)


# ---------------------------------------------------------------------------
# scenario file format (documented in docs/scenario_format.md)

def _rle_encode(values) -> list:
    out = []
    for v in values:
        if out and out[-1][1] == v:
            out[-1][0] += 1
        else:
            out.append([1, v])
    return out


def _rle_decode(runs, n: int, what: str) -> list:
    out = []
    for run in runs:
        if not isinstance(run, list) or len(run) != 2:
            raise ParseError(f"{what}: malformed RLE run {run!r}")
        count, value = run
        out.extend([value] * int(count))
    if len(out) != n:
        raise ParseError(f"{what}: RLE decodes to {len(out)} cells, expected {n}")
    return out


def _sensor_to_dict(s: cfg.SensorSpec) -> dict:
    d = asdict(s)
    d["channels"] = list(s.channels)
    return d


def scenario_to_dict(s: Scenario) -> dict:
    g = s.grid
    return {
        "format_version": FORMAT_VERSION,
        "seed": s.seed,
        "controller_mode": s.controller_mode,
        "deploy_cell": s.deploy_cell,
        "grid": {
            "width": g.width,
            "height": g.height,
            "cell_size": g.cell_size,
            "terrain_rle": _rle_encode(cfg.TERRAINS[t] for t in g.terrain),
            "indoor_rle": _rle_encode(int(v) for v in g.indoor),
            "obstacle_rle": _rle_encode(int(v) for v in g.obstacle),
            "prior_rle": _rle_encode(float(v) for v in g.terrain_prior),
        },
        "threats": [
            {"id": t.id, "class": t.cls, "charge": t.charge,
             "initiator": t.initiator, "metal_fraction": t.metal_fraction,
             "depth": t.depth, "cell": t.cell}
            for t in s.threats
        ],
        "fleet_config": {
            "counts": dict(s.fleet_config.counts),
            "speeds": dict(s.fleet_config.speeds),
            "batteries": dict(s.fleet_config.batteries),
            "pose_sigma_outdoor": s.fleet_config.pose_sigma_outdoor,
            "pose_sigma_indoor": s.fleet_config.pose_sigma_indoor,
            "arm_dwell_ticks": s.fleet_config.arm_dwell_ticks,
            "sensors": {k: _sensor_to_dict(v)
                        for k, v in sorted(s.fleet_config.sensors.items())},
        },
        "net_config": {
            "radio_range": s.net_config.radio_range,
            "p_link_loss": s.net_config.p_link_loss,
            "base_latency": s.net_config.base_latency,
            "ttl": s.net_config.ttl,
            "command_centre_pos": list(s.net_config.command_centre_pos),
        },
    }


def scenario_from_dict(doc: dict) -> Scenario:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"scenario format_version {version!r}, "
                              f"this build reads {FORMAT_VERSION}")
    try:
        gd = doc["grid"]
        w, h = int(gd["width"]), int(gd["height"])
        n = w * h
        terrain_names = _rle_decode(gd["terrain_rle"], n, "terrain")
        try:
            terrain = np.array([TERRAIN_CODE[t] for t in terrain_names],
                               dtype=np.int8)
        except KeyError as exc:
            raise ParseError(f"terrain: unknown surface {exc.args[0]!r}") from None
        indoor = np.array(_rle_decode(gd["indoor_rle"], n, "indoor"), dtype=bool)
        obstacle = np.array(_rle_decode(gd["obstacle_rle"], n, "obstacle"),
                            dtype=bool)
        prior = np.array(_rle_decode(gd["prior_rle"], n, "prior"),
                         dtype=np.float64)
        grid = WorldGrid(w, h, terrain, indoor, obstacle, prior,
                         cell_size=float(gd.get("cell_size", 1.0)))

        threats = []
        for td in doc["threats"]:
            t = Threat(id=int(td["id"]), cls=str(td["class"]),
                       charge=str(td["charge"]), initiator=str(td["initiator"]),
                       metal_fraction=float(td["metal_fraction"]),
                       depth=float(td["depth"]), cell=int(td["cell"]))
            if not grid.in_bounds(t.cell):
                raise ParseError(f"threat {t.id}: cell {t.cell} out of bounds")
            if t.cls not in cfg.THREAT_CLASSES:
                raise ParseError(f"threat {t.id}: unknown class {t.cls!r}")
            threats.append(t)

        fd = doc["fleet_config"]
        sensors = {}
        for kind, sd in fd["sensors"].items():
            sensors[kind] = cfg.SensorSpec(
                kind=str(sd["kind"]), footprint_radius=float(sd["footprint_radius"]),
                max_depth=float(sd["max_depth"]), p_det_base=float(sd["p_det_base"]),
                depth_decay=float(sd["depth_decay"]), p_fp=float(sd["p_fp"]),
                feature_noise=float(sd["feature_noise"]),
                channels=tuple(int(c) for c in sd["channels"]))
        fleet = cfg.FleetConfig(
            counts={k: int(v) for k, v in fd["counts"].items()},
            speeds={k: float(v) for k, v in fd["speeds"].items()},
            batteries={k: float(v) for k, v in fd["batteries"].items()},
            pose_sigma_outdoor=float(fd["pose_sigma_outdoor"]),
            pose_sigma_indoor=float(fd["pose_sigma_indoor"]),
            arm_dwell_ticks=int(fd["arm_dwell_ticks"]),
            sensors=sensors)

        nd = doc["net_config"]
        net = cfg.NetConfig(radio_range=float(nd["radio_range"]),
                            p_link_loss=float(nd["p_link_loss"]),
                            base_latency=int(nd["base_latency"]),
                            ttl=int(nd["ttl"]),
                            command_centre_pos=tuple(
                                float(v) for v in nd["command_centre_pos"]))

        mode = str(doc["controller_mode"])
        if mode not in ("centralized", "mns"):
            raise ParseError(f"unknown controller_mode {mode!r}")
        return Scenario(grid=grid, threats=tuple(threats), fleet_config=fleet,
                        net_config=net, seed=int(doc["seed"]),
                        controller_mode=mode,
                        deploy_cell=int(doc.get("deploy_cell", 0)))
    except (ParseError, VersionMismatch):
        raise
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise ParseError(f"scenario document invalid: {exc}") from exc


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_dict(scenario), f, indent=1, sort_keys=True)
        f.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_dict(doc)
