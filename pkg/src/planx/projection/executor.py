"""Plan interpreter for the fast projection environment.

The robot teleports between key poses; every base and gripper key-point
change is logged as a motion so costs can be summed afterwards. Perception
and inverse kinematics are replaced by seeded random draws.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

from planx.errors import ConfigError, NoSampleFound, PlanFailure
from planx.plan import (
    ACTION_LIBRARY, Designator, Loop, Perform, PlanDef, PlanExpr, Seq, expand_children,
    location_reference,
)
from planx.projection.trace import ACTION_END, ACTION_START, FAILURE, RECOVERY, ExecutionTrace, RunMetrics
from planx.projection.world import (
    ARMS, TRAY_TYPE, Placement, Point, Pose, WorldObject, WorldState, dist2d, ground_location,
)
from planx.tasktree import CREATED, FAILED, SUCCEEDED, NodePath, TaskTree, TaskTreeNode

REACH = 0.9
BASE_RANGE = (0.45, 0.85)
VANTAGE_RANGE = (0.6, 1.0)
APPROACH = 0.15
TRAY_HANDLE = 0.2


@dataclass
class SamplingConfig:
    seed: int = 0
    p_grasp_fail: float = 0.0
    p_detect_fail: float = 0.0
    p_unreachable_sample: float = 0.0
    # per-action-type overrides of the library retry counts
    retries: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p_grasp_fail", "p_detect_fail", "p_unreachable_sample"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be within [0, 1], got {p}")
        for k, v in self.retries.items():
            if k not in ACTION_LIBRARY or v < 0:
                raise ConfigError(f"bad retry limit {k}={v}")

    def retry_limit(self, action_type: str) -> int:
        return self.retries.get(action_type, ACTION_LIBRARY[action_type].retries)

    @classmethod
    def from_dict(cls, data: dict | None, seed: int = 0) -> "SamplingConfig":
        data = dict(data or {})
        known = {"seed", "p_grasp_fail", "p_detect_fail", "p_unreachable_sample", "retries"}
        if set(data) - known:
            raise ConfigError(f"unknown sampling parameters: {sorted(set(data) - known)}")
        try:
            return cls(seed=int(data.get("seed", seed)),
                       p_grasp_fail=float(data.get("p_grasp_fail", 0.0)),
                       p_detect_fail=float(data.get("p_detect_fail", 0.0)),
                       p_unreachable_sample=float(data.get("p_unreachable_sample", 0.0)),
                       retries={k: int(v) for k, v in data.get("retries", {}).items()})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad sampling parameters: {e}") from None

    def with_seed(self, seed: int) -> "SamplingConfig":
        return SamplingConfig(seed, self.p_grasp_fail, self.p_detect_fail, self.p_unreachable_sample,
                              dict(self.retries))

    def failure_free(self) -> "SamplingConfig":
        return SamplingConfig(self.seed, retries=dict(self.retries))


@dataclass
class _Frame:
    # None while interpreting a code replacement: no persistent nodes are made
    node: Optional[TaskTreeNode]
    path: NodePath
    counts: Counter = field(default_factory=Counter)


def _action(kind: str, *props) -> Designator:
    return Designator("an", "action", (("type", kind),) + tuple(p for p in props if p[1] is not None))


def _pose_location(pose: Pose) -> Designator:
    return Designator("a", "location", (("x", round(pose.x, 4)), ("y", round(pose.y, 4)),
                                        ("theta", round(pose.theta, 4))))


def _object_type(d: Designator) -> Optional[str]:
    obj = d.get("object")
    return obj.get("type") if isinstance(obj, Designator) else None


class Projector:
    """One projection run: owns its world, RNG and trace; updates ``tree``."""

    def __init__(self, world: WorldState, cfg: SamplingConfig, tree: TaskTree | None = None):
        self.world = world
        self.cfg = cfg
        self.tree = tree if tree is not None else TaskTree()
        self.rng = random.Random(cfg.seed)
        self.trace = ExecutionTrace()
        self.perceived: dict[Designator, str] = {}
        self.failure: Optional[PlanFailure] = None

    # -- driver --

    def run(self, plan: PlanDef) -> RunMetrics:
        root = self.tree.root
        self.tree.plan_name = plan.name
        root.status = CREATED
        frame = _Frame(root, root.path)
        self.trace.log(ACTION_START, root.path, type="top-level", plan=plan.name)
        try:
            self._exec_body(plan.body, {}, frame)
            root.status = SUCCEEDED
        except PlanFailure as f:
            root.status = FAILED
            self.failure = f
        self.trace.log(ACTION_END, root.path, type="top-level", status=root.status)
        return RunMetrics.from_trace(self.trace, self.failure is not None)

    def _exec_body(self, body: tuple[PlanExpr, ...], env: dict, frame: _Frame):
        for expr in body:
            if isinstance(expr, Perform):
                self._perform(expr.designator.substitute(env), frame)
            elif isinstance(expr, Loop):
                for item in expr.items:
                    self._exec_body(expr.body, {**env, expr.var.name: item}, frame)
            elif isinstance(expr, Seq):
                self._exec_body(expr.body, env, frame)
            else:
                raise TypeError(f"not a plan expression: {expr!r}")

    def _perform(self, desig: Designator, parent: _Frame, impl: Callable[[_Frame], object] | None = None):
        atype = desig.get("type")
        if atype not in ACTION_LIBRARY:
            raise PlanFailure(str(parent.path), f"unknown action type {atype!r}")
        node = None
        if parent.node is not None:
            parent.counts[atype] += 1
            path = self.tree.ensure_child(parent.node.path, atype, parent.counts[atype])
            node = self.tree.find_node(path)
            node.action = desig
            node.status = CREATED
            if node.code_replacement is not None:
                return self._run_replacement(node)
            frame = _Frame(node, path)
        else:
            frame = _Frame(None, parent.path)
        detail = {"type": atype}
        obj = _object_type(desig)
        if obj is not None:
            detail["object"] = obj
        if "arm" in desig:
            detail["arm"] = desig.get("arm")
        if node is None:
            detail["replacement"] = True
        self.trace.log(ACTION_START, frame.path, **detail)
        try:
            result = impl(frame) if impl is not None else self._composite(desig, frame)
        except PlanFailure:
            self._end(frame.path, atype, node, FAILED)
            raise
        self._end(frame.path, atype, node, FAILED if result is False else SUCCEEDED)
        return result

    def _end(self, path, atype, node, status):
        if node is not None:
            node.status = status
        self.trace.log(ACTION_END, path, type=atype, status=status)

    def _run_replacement(self, node: TaskTreeNode):
        repl = node.code_replacement
        if repl.is_nil:
            node.status = SUCCEEDED
            return None
        self.trace.log(ACTION_START, node.path, type=node.name, replaced=True)
        frame = _Frame(None, node.path)
        try:
            for expr in repl.body:
                self._perform(expr.designator, frame)
        except PlanFailure:
            self._end(node.path, node.name, node, FAILED)
            raise
        self._end(node.path, node.name, node, SUCCEEDED)
        return None

    def _composite(self, desig: Designator, frame: _Frame):
        handler = {
            "transporting": self._transporting,
            "searching": self._searching,
            "fetching": self._fetching,
            "delivering": self._delivering,
            "opening": self._opening,
            "closing": self._closing,
        }.get(desig.get("type"))
        if handler is None:
            raise PlanFailure(str(frame.path), f"{desig.get('type')} is an atomic action")
        return handler(desig, frame)

    # -- event helpers --

    def _fail(self, frame: _Frame, reason: str, **detail):
        self.trace.log(FAILURE, frame.path, reason=reason, **detail)

    def _recover(self, frame: _Frame, strategy: str):
        self.trace.log(RECOVERY, frame.path, strategy=strategy)

    def _draw(self, p: float) -> bool:
        # always consume a draw so the stream does not depend on p
        return self.rng.random() < p

    def _sample_around(self, x: float, y: float, lo: float, hi: float) -> Pose:
        r = self.rng.uniform(lo, hi)
        phi = self.rng.uniform(-math.pi, math.pi)
        bx, by = x + r * math.cos(phi), y + r * math.sin(phi)
        return Pose(bx, by, math.atan2(y - by, x - bx))

    def _in_reach(self, p) -> bool:
        return dist2d(self.world.robot.base, p) <= REACH

    # -- atomic actions --

    def _navigate(self, frame: _Frame, to: Pose):
        def impl(f):
            robot = self.world.robot
            self.trace.base_motion(f.path, robot.base, to)
            robot.base = to
            robot.park_arms()
            return True
        self._perform(_action("navigating", ("target", _pose_location(to))), frame, impl)

    def _move(self, frame: _Frame, arm: str, to: Point):
        kp = self.world.robot.keypoints
        self.trace.arm_motion(frame.path, arm, kp[arm], to)
        kp[arm] = Point(*to)

    def _detect(self, frame: _Frame, obj: Designator, loc: Optional[Designator]) -> Optional[str]:
        def impl(f):
            candidates = self.world.objects_at(obj, loc)
            if self._draw(self.cfg.p_detect_fail) or not candidates:
                self._fail(f, "object-not-found")
                return False
            return candidates[0].name
        found = self._perform(_action("detecting", ("object", obj)), frame, impl)
        return found or None

    def _pick(self, frame: _Frame, arms: list[str], obj: WorldObject) -> bool:
        world = self.world

        def impl(f):
            target = world.position(obj.name)
            grips = self._grip_points(arms, target)
            for arm, g in zip(arms, grips):
                self._move(f, arm, Point(g.x, g.y, g.z + APPROACH))
                self._move(f, arm, g)
            if self._draw(self.cfg.p_grasp_fail):
                self._fail(f, "grasp-failed", arm="+".join(arms))
                for arm, g in zip(arms, grips):
                    self._move(f, arm, Point(g.x, g.y, g.z + APPROACH))
                    self._move(f, arm, world.robot.park_pose(arm))
                return False
            if obj.support[0] == "tray":
                world.tray.slots[obj.support[1]] = None
            for arm, g in zip(arms, grips):
                world.robot.held[arm] = obj.name
                self._move(f, arm, Point(g.x, g.y, g.z + APPROACH))
            for arm in arms:
                self._move(f, arm, world.robot.park_pose(arm))
            obj.support = ("arm", arms[0])
            return True
        return bool(self._perform(_action("picking-up", ("arm", "+".join(arms)),
                                          ("object", Designator("an", "object", (("name", obj.name),)))),
                                  frame, impl))

    def _place(self, frame: _Frame, arms: list[str], obj: WorldObject, where: Placement):
        world = self.world

        def impl(f):
            target = Point(where.pose.x, where.pose.y, where.z)
            grips = self._grip_points(arms, target)
            for arm, g in zip(arms, grips):
                self._move(f, arm, Point(g.x, g.y, g.z + APPROACH))
                self._move(f, arm, g)
            for arm in arms:
                world.robot.held[arm] = None
            obj.pose = where.pose
            obj.support = where.support
            if where.support[0] == "tray":
                world.tray.slots[where.support[1]] = obj.name
            for arm, g in zip(arms, grips):
                self._move(f, arm, Point(g.x, g.y, g.z + APPROACH))
                self._move(f, arm, world.robot.park_pose(arm))
            return True
        self._perform(_action("placing", ("arm", "+".join(arms)),
                              ("object", Designator("an", "object", (("name", obj.name),)))), frame, impl)

    def _grip_points(self, arms: list[str], target: Point) -> list[Point]:
        if len(arms) == 1:
            return [target]
        # two-handed grasp at the tray's side handles
        base = self.world.robot.base
        c, s = math.cos(base.theta + math.pi / 2), math.sin(base.theta + math.pi / 2)
        return [Point(target.x + TRAY_HANDLE * c, target.y + TRAY_HANDLE * s, target.z),
                Point(target.x - TRAY_HANDLE * c, target.y - TRAY_HANDLE * s, target.z)]

    # -- composite actions --

    def _transporting(self, desig: Designator, frame: _Frame):
        for child in expand_children(desig):
            self._perform(child, frame)
        return True

    def _searching(self, desig: Designator, frame: _Frame):
        obj, loc = desig.get("object"), desig.get("location")
        for attempt in range(self.cfg.retry_limit("searching") + 1):
            if attempt:
                self._recover(frame, "reposition")
            vantage = self._search_vantage(obj, loc, first=attempt == 0)
            if vantage is not None:
                self._navigate(frame, vantage)
            found = self._detect(frame, obj, loc)
            if found is not None:
                self.perceived[obj] = found
                return True
        raise PlanFailure(str(frame.path), f"could not find {obj}")

    def _search_vantage(self, obj, loc, first: bool) -> Optional[Pose]:
        """Base pose to look from; None when the robot can stay where it is."""
        if loc is not None:
            ref = location_reference(loc)
            region = None
            if ref is not None:
                rel, target = ref
                place = self.world.find_container(target) if rel == "in" else self.world.find_area(target)
                region = None if place is None else place.rect
            if region is None:
                return None
            x, y = region.sample(self.rng)
            return self._sample_around(x, y, *VANTAGE_RANGE)
        # object-directed search, e.g. looking for the tray
        candidates = self.world.objects_at(obj, None)
        if not candidates:
            return None
        p = self.world.position(candidates[0].name)
        if first and self._in_reach(p):
            return None
        return self._sample_around(p.x, p.y, *BASE_RANGE)

    def _resolve_object(self, obj: Designator, loc, frame: _Frame) -> WorldObject:
        name = self.perceived.get(obj)
        if name is not None:
            o = self.world.objects[name]
            if o.support[0] != "arm" and o in self.world.objects_at(obj, loc):
                return o
        self._fail(frame, "object-unknown")
        raise PlanFailure(str(frame.path), f"no perceived object for {obj}")

    def _fetching(self, desig: Designator, frame: _Frame):
        obj_desc, loc = desig.get("object"), desig.get("location")
        robot = self.world.robot
        obj = self._resolve_object(obj_desc, loc, frame)
        if obj.support[0] == "container" and not self.world.containers[obj.support[1]].open:
            self._fail(frame, "container-closed", container=obj.support[1])
            raise PlanFailure(str(frame.path), f"{obj.support[1]} is closed")
        two_handed = obj.type == TRAY_TYPE or desig.get("arms") in (2, "both")
        for attempt in range(self.cfg.retry_limit("fetching") + 1):
            if attempt:
                self._recover(frame, "reposition")
            p = self.world.position(obj.name)
            if attempt or not self._in_reach(p):
                self._navigate(frame, self._sample_around(p.x, p.y, *BASE_RANGE))
            if self._draw(self.cfg.p_unreachable_sample):
                self._fail(frame, "unreachable")
                continue
            free = robot.free_arms()
            if two_handed:
                if len(free) < 2:
                    self._fail(frame, "arms-occupied")
                    raise PlanFailure(str(frame.path), "two-handed grasp needs both arms free")
                if self._pick(frame, list(free), obj):
                    return True
                continue
            if not free:
                self._fail(frame, "no-free-arm")
                raise PlanFailure(str(frame.path), "both arms are occupied")
            for k, arm in enumerate(self.rng.sample(free, len(free))):
                if k:
                    self._recover(frame, "switch-arm")
                if self._pick(frame, [arm], obj):
                    return True
        raise PlanFailure(str(frame.path), f"could not fetch {obj.name}")

    def _delivering(self, desig: Designator, frame: _Frame):
        obj_desc, target = desig.get("object"), desig.get("target")
        robot = self.world.robot
        held = [n for a in robot.held if (n := robot.held[a]) is not None]
        match = next((n for n in held if self.world.matches(self.world.objects[n], obj_desc)), None)
        if match is None:
            self._fail(frame, "object-not-held")
            raise PlanFailure(str(frame.path), f"not holding {obj_desc}")
        obj = self.world.objects[match]
        arms = self.world.holder_of(match)
        for attempt in range(self.cfg.retry_limit("delivering") + 1):
            if attempt:
                self._recover(frame, "resample-target")
            try:
                where = ground_location(target, self.world, self.rng, obj.radius, ignore=obj.name)
            except NoSampleFound as e:
                self._fail(frame, "no-placement", message=str(e))
                continue
            if attempt or not self._in_reach(where.pose):
                self._navigate(frame, self._sample_around(where.pose.x, where.pose.y, *BASE_RANGE))
            if self._draw(self.cfg.p_unreachable_sample):
                self._fail(frame, "unreachable")
                continue
            self._place(frame, arms, obj, where)
            return True
        raise PlanFailure(str(frame.path), f"could not deliver {obj.name}")

    def _container(self, desig: Designator, frame: _Frame):
        ref = desig.get("object")
        c = self.world.find_container(ref) if isinstance(ref, Designator) else None
        if c is None:
            self._fail(frame, "unknown-container")
            raise PlanFailure(str(frame.path), f"no container matches {ref}")
        return c

    def _articulate(self, frame: _Frame, c, opening: bool):
        hx, hy = c.handle
        if not self._in_reach((hx, hy)):
            self._navigate(frame, self._sample_around(hx, hy, *BASE_RANGE))
        free = self.world.robot.free_arms()
        if not free and opening:
            self._fail(frame, "no-free-arm")
            raise PlanFailure(str(frame.path), "no free arm to pull the handle")
        # pushing a drawer shut works with a loaded gripper too
        arm = free[0] if free else ARMS[0]
        base = self.world.robot.base
        d = math.hypot(base.x - hx, base.y - hy) or 1.0
        ux, uy = (base.x - hx) / d, (base.y - hy) / d
        closed_pt = Point(hx, hy, c.height + 0.1)
        open_pt = Point(hx + ux * c.joint_travel, hy + uy * c.joint_travel, c.height + 0.1)

        def impl(f):
            start, end = (closed_pt, open_pt) if opening else (open_pt, closed_pt)
            self._move(f, arm, start)
            self._move(f, arm, end)
            self._move(f, arm, self.world.robot.park_pose(arm))
            c.open = opening
            return True
        self._perform(_action("pulling" if opening else "pushing", ("arm", arm)), frame, impl)

    def _opening(self, desig: Designator, frame: _Frame):
        c = self._container(desig, frame)
        if not c.open:
            self._articulate(frame, c, opening=True)
        return True

    def _closing(self, desig: Designator, frame: _Frame):
        c = self._container(desig, frame)
        if c.open:
            self._articulate(frame, c, opening=False)
        return True


def check_plan(plan: PlanDef) -> None:
    def visit(body):
        for e in body:
            if isinstance(e, Perform):
                t = e.designator.get("type")
                if t not in ACTION_LIBRARY:
                    raise ConfigError(f"plan {plan.name}: unknown action type {t!r}")
            else:
                visit(e.body)
    visit(plan.body)


def project(plan: PlanDef, world: WorldState, cfg: SamplingConfig, tree: TaskTree | None = None):
    """Execute ``plan`` in projection; returns ``(tree, trace, metrics)``.

    ``world`` is mutated to the final state; pass a copy to keep the original.
    """
    check_plan(plan)
    p = Projector(world, cfg, tree)
    metrics = p.run(plan)
    return p.tree, p.trace, metrics
