import dataclasses

import pytest

from pocmt.adversary import AdversaryConfig
from pocmt.simulator import ExperimentConfig, HonestConfig
from pocmt.timeline import Timeline


def small_config(T=200, nh=8, s=12, m=3, seed=0, **adv):
    """A quick run used across module tests."""
    return ExperimentConfig(timeline=Timeline(1, T), honest=HonestConfig(nh),
                            adversary=AdversaryConfig(sybil_count=s, adversary_humans=m, **adv),
                            seed=seed)


@pytest.fixture
def small():
    return small_config


def replace(cfg, **kw):
    return dataclasses.replace(cfg, **kw)
