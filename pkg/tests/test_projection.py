import random

import pytest
from hypothesis import given, settings, strategies as st

from planx.errors import ConfigError, NoSampleFound
from planx.plan import Perform, parse_designator, parse_plan
from planx.projection import (
    ExecutionTrace, RunMetrics, SamplingConfig, ground_location, manipulation_cost, navigation_cost, project,
)
from planx.projection.trace import ACTION_END, ACTION_START, FAILURE, MOTION, RECOVERY, TraceEvent
from planx.projection.world import world_from_scenario
from planx.tasktree import CodeReplacement, NodePath, TaskTree
from planx.transforms import apply_both_hands, both_hands_applicability

from conftest import FREE, bundled_plan, bundled_sampling, bundled_world, projected

SCENARIOS = [
    ("transport_objects.plan", "kitchen.json"),
    ("four_objects.plan", "four_objects.json"),
    ("tray_three.plan", "tray_three.json"),
    ("table_setting.plan", "table_setting.json"),
]
SINK = parse_designator("(a location (on (an object (type CounterTop) (name sink_area))))")
TRAY = parse_designator("(a location (on (an object (type tray))))")


def motion(frm, to):
    return TraceEvent(MOTION, "x", {"base_from": list(frm), "base_to": list(to)})


def test_cost_examples():
    assert navigation_cost([motion((0, 0, 0), (3, 4, 0))]) == 5.0
    assert navigation_cost(ExecutionTrace()) == 0.0
    assert manipulation_cost(ExecutionTrace()) == 0.0
    # hand-summed legs: 3 + 2
    assert navigation_cost([motion((0, 0, 0), (0, 3, 0)), motion((0, 3, 0), (2, 3, 0))]) == 5.0
    arm = TraceEvent(MOTION, "x", {"arm": "left", "keypoint_from": [0, 0, 0], "keypoint_to": [1, 2, 2]})
    assert manipulation_cost([arm]) == 3.0


def test_milk_cup_tree_shape(milk_cup_tree):
    transports = milk_cup_tree.root.children
    assert [t.name for t in transports] == ["transporting", "transporting"]
    for t in transports:
        assert [c.name for c in t.children] == ["searching", "fetching", "delivering"]


@pytest.mark.parametrize("plan,scenario", SCENARIOS)
def test_same_seed_identical(plan, scenario):
    cfg = bundled_sampling(scenario, seed=17)
    _, t1, m1, w1 = projected(plan, scenario, cfg)
    _, t2, m2, w2 = projected(plan, scenario, cfg)
    assert m1 == m2
    assert t1.to_jsonl() == t2.to_jsonl()
    assert w1 == w2


@pytest.mark.parametrize("plan,scenario", SCENARIOS)
def test_failure_free_baseline_succeeds(plan, scenario):
    tree, trace, m, world = projected(plan, scenario)
    assert not m.plan_failed and m.failure_event_count == 0
    assert trace.is_well_nested()
    # every performed action made exactly one node
    assert m.action_count == len(tree)
    assert all(world.robot.held[a] is None for a in world.robot.held)


def test_action_count_recount_from_dump():
    tree = projected("transport_objects.plan", "kitchen.json")[0]
    path = NodePath.root().child("transporting").child("delivering")
    node = tree.find_node(path)
    tree.set_code_replacement(path, CodeReplacement((Perform(node.action),)))
    _, trace, m, _ = projected("transport_objects.plan", "kitchen.json", tree=tree)
    starts = [e for e in ExecutionTrace.from_jsonl(trace.to_jsonl()) if e.kind == ACTION_START]
    detached = [e for e in starts if e.detail.get("replacement")]
    # nodes below a replaced node are kept but not expanded on this run
    skipped = {n.path for n in node.walk() if n is not node}
    expanded = [n for n in tree if n.path not in skipped]
    assert m.action_count == len(starts)
    assert len(starts) - len(detached) == len(expanded)
    assert {e.path for e in detached} == {str(path)}
    assert not m.plan_failed


def test_failed_replacement_fails_plan():
    tree = projected("transport_objects.plan", "kitchen.json")[0]
    path = NodePath.root().child("transporting").child("delivering")
    action = tree.find_node(path).action
    tree.set_code_replacement(path, CodeReplacement((Perform(action), Perform(action))))
    _, trace, m, _ = projected("transport_objects.plan", "kitchen.json", tree=tree)
    # the second delivery has nothing left to deliver
    assert m.plan_failed
    assert [e.detail["reason"] for e in trace if e.kind == FAILURE] == ["object-not-held"]
    assert trace.is_well_nested()


def test_recovered_grasp_failure_counts_once():
    trace = ExecutionTrace()
    trace.log(ACTION_START, "p", type="picking-up")
    trace.log(FAILURE, "p", reason="grasp-failed")
    trace.log(ACTION_END, "p", type="picking-up", status="failed")
    trace.log(RECOVERY, "f", strategy="switch-arm")
    trace.log(ACTION_START, "p2", type="picking-up")
    trace.log(ACTION_END, "p2", type="picking-up", status="succeeded")
    m = RunMetrics.from_trace(trace, plan_failed=False)
    assert m.failure_event_count == 1 and not m.plan_failed and m.action_count == 2


def test_recovered_failure_in_projection():
    plan = bundled_plan("transport_objects.plan")
    for seed in range(200):
        cfg = SamplingConfig(seed, p_grasp_fail=0.3)
        _, trace, m = project(plan, bundled_world("kitchen.json"), cfg, TaskTree())
        if m.failure_event_count == 1:
            break
    else:
        pytest.fail("no seed with exactly one grasp failure")
    (fail,) = [e for e in trace if e.kind == FAILURE]
    assert fail.detail["reason"] == "grasp-failed"
    assert not m.plan_failed
    assert any(e.kind == RECOVERY for e in trace)


def test_ground_inside_rect():
    world = bundled_world("kitchen.json")
    rect = world.areas["sink_area"].rect
    rng = random.Random(0)
    poses = [ground_location(SINK, world, rng) for _ in range(20)]
    assert all(rect.contains(p.pose.x, p.pose.y) for p in poses)
    assert len({(p.pose.x, p.pose.y) for p in poses}) == 20


def test_ground_full_tray():
    world = bundled_world("tray_three.json")
    for i in range(len(world.tray.slots)):
        world.tray.slots[i] = f"filler{i}"
    with pytest.raises(NoSampleFound):
        ground_location(TRAY, world, random.Random(0))


def test_ground_tray_slots_row_major():
    world = bundled_world("tray_three.json")
    p = ground_location(TRAY, world, random.Random(0))
    assert p.support == ("tray", 0)
    world.tray.slots[0] = "x"
    assert ground_location(TRAY, world, random.Random(0)).support == ("tray", 1)


def test_scenario_validation():
    with pytest.raises(ConfigError):
        world_from_scenario({"areas": {}, "objects": {"a": {"type": "cup", "pose": [0, 0, 0], "support": "nowhere"}}})
    with pytest.raises(ConfigError):
        world_from_scenario([])
    with pytest.raises(ConfigError):
        world_from_scenario({"objects": []})
    with pytest.raises(ConfigError):
        SamplingConfig.from_dict({"p_grasp_fail": 2.0})
    with pytest.raises(ConfigError):
        SamplingConfig.from_dict({"p_grasp": 0.1})


def test_unknown_action_type():
    plan = parse_plan("(def-plan x () (perform (an action (type juggling))))")
    with pytest.raises(ConfigError):
        project(plan, bundled_world("kitchen.json"), FREE)


def test_closed_drawer_fetch_fails():
    plan = parse_plan("""(def-plan x () (perform (an action (type fetching) (object (an object (type spoon)))
        (location (a location (in (an object (type drawer) (name drawer))))))))""")
    world = bundled_world("table_setting.json")
    tree, trace, m = project(plan, world, FREE, TaskTree())
    assert m.plan_failed
    assert any(e.detail.get("reason") in ("container-closed", "object-unknown") for e in trace if e.kind == FAILURE)


def check_conservation(initial, world):
    assert set(world.objects) == set(initial.objects)
    held = {n for n in world.robot.held.values() if n is not None}
    for o in world.objects.values():
        kind, where = o.support
        if kind == "arm":
            assert o.name in held and world.robot.held[where] == o.name
        elif kind == "tray":
            assert world.tray.slots[where] == o.name
        else:
            assert kind in ("area", "container")
    slotted = [n for n in (world.tray.slots if world.tray else []) if n is not None]
    assert len(slotted) == len(set(slotted))
    assert all(world.objects[n].support[0] == "tray" for n in slotted)


def check_occupancy(trace):
    held = set()
    open_calls = []
    for e in trace:
        if e.kind == ACTION_START and e.detail.get("type") in ("picking-up", "placing"):
            arms = set(e.detail["arm"].split("+"))
            if e.detail["type"] == "picking-up":
                assert not (arms & held), f"grasp commanded with occupied arm at {e.path}"
            open_calls.append((e.detail["type"], arms))
        elif e.kind == ACTION_END and e.detail.get("type") in ("picking-up", "placing"):
            kind, arms = open_calls.pop()
            if e.detail["status"] == "succeeded":
                held = held | arms if kind == "picking-up" else held - arms


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SCENARIOS), st.integers(0, 100_000))
def test_conservation_and_occupancy(scenario, seed):
    plan, scen = scenario
    initial = bundled_world(scen)
    _, trace, m, world = projected(plan, scen, bundled_sampling(scen, seed))
    check_conservation(initial, world)
    check_occupancy(trace)
    if not m.plan_failed:
        assert not any(world.robot.held.values())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_both_hands_occupancy(seed):
    cfg = bundled_sampling("four_objects.json", seed)
    tree = projected("four_objects.plan", "four_objects.json", cfg)[0]
    while (schema := both_hands_applicability(tree)) is not None:
        apply_both_hands(tree, schema)
    _, trace, m, world = projected("four_objects.plan", "four_objects.json", cfg, tree)
    check_occupancy(trace)
    check_conservation(bundled_world("four_objects.json"), world)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SCENARIOS), st.integers(0, 100_000))
def test_determinism_property(scenario, seed):
    plan, scen = scenario
    cfg = bundled_sampling(scen, seed)
    a = projected(plan, scen, cfg)
    b = projected(plan, scen, cfg)
    assert a[2] == b[2] and a[1].events == b[1].events
