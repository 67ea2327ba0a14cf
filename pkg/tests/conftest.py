import dataclasses

import pytest

from sweepsim import config as cfg
from sweepsim import world


@pytest.fixture
def small_scenario():
    params = world.ScenarioParams(width=20, height=20, threat_count=4,
                                  indoor_fraction=0.1, obstacle_density=0.04)
    return world.generate_scenario(params, 11)


def perfect_sensor_table():
    """p_det 1 at depth 0, no false positives, no feature noise."""
    table = {}
    for kind, spec in cfg.SENSOR_TABLE.items():
        table[kind] = dataclasses.replace(spec, p_det_base=1.0, p_fp=0.0,
                                          feature_noise=0.0)
    return table


def with_net(scenario, **net_kwargs):
    net = dataclasses.replace(scenario.net_config, **net_kwargs)
    return dataclasses.replace(scenario, net_config=net)


def with_fleet(scenario, **fleet_kwargs):
    fleet = dataclasses.replace(scenario.fleet_config, **fleet_kwargs)
    return dataclasses.replace(scenario, fleet_config=fleet)
