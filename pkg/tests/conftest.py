import sys

import pytest

from planx import data_path
from planx.plan import parse_plan
from planx.projection import SamplingConfig, load_scenario, project, world_from_scenario
from planx.tasktree import TaskTree


def bundled_plan(name):
    with open(data_path(name)) as f:
        return parse_plan(f.read())


def bundled_world(name):
    return world_from_scenario(load_scenario(data_path(name)))


def bundled_sampling(name, seed=0):
    return SamplingConfig.from_dict(load_scenario(data_path(name)).get("sampling"), seed)


FREE = SamplingConfig(seed=0).failure_free()


def projected(plan_file, scenario_file, cfg=FREE, tree=None):
    """Project a bundled plan on a bundled scenario; returns (tree, trace, metrics, world)."""
    world = bundled_world(scenario_file)
    tree, trace, metrics = project(bundled_plan(plan_file), world, cfg, tree if tree is not None else TaskTree())
    return tree, trace, metrics, world


@pytest.fixture
def milk_cup_tree():
    return projected("transport_objects.plan", "kitchen.json")[0]


@pytest.fixture
def four_tree():
    return projected("four_objects.plan", "four_objects.json")[0]


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance.RESULTS, key=lambda s: int(s.split()[1].rstrip("."))):
        terminalreporter.write_line(line)
