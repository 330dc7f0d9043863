"""2-D kitchen world used by the projection environment.

Scenario files are JSON::

    {
      "areas": {"sink_area": {"type": "countertop", "rect": [0, 0, 2, 0.8], "height": 0.9}},
      "containers": {"drawer": {"type": "drawer", "host_area": "sink_area",
                                "rect": [0.2, -0.35, 0.7, -0.05], "joint_travel": 0.4}},
      "objects": {"milk": {"type": "milk", "pose": [0.5, 0.4, 0], "support": "sink_area"}},
      "tray": {"name": "tray", "pose": [1.5, 4.2, 0], "support": "island_area"},
      "robot": {"base_pose": [1.0, 2.3, 0]},
      "sampling": {"p_grasp_fail": 0.3}
    }

An object's ``support`` names an area, a container, or (for objects that
start on the tray) ``"tray"``.
"""

from __future__ import annotations

import copy
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

from planx.errors import ConfigError, NoSampleFound
from planx.plan import Designator, location_reference, reference_identity

ARMS = ("left", "right")
TRAY_TYPE = "tray"
DEFAULT_RADIUS = 0.06
TRAY_RADIUS = 0.22
TRAY_SLOT_SPACING = 0.12
TRAY_SURFACE = 0.02
PLACEMENT_TRIES = 30
SURFACE_MARGIN = 0.05


class Pose(NamedTuple):
    x: float
    y: float
    theta: float = 0.0


class Point(NamedTuple):
    x: float
    y: float
    z: float


def dist2d(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def dist3d(a, b) -> float:
    return math.dist(a, b)


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ConfigError(f"degenerate rectangle {self}")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def sample(self, rng: random.Random, margin: float = 0.0) -> tuple[float, float]:
        mx = min(margin, (self.x1 - self.x0) / 2)
        my = min(margin, (self.y1 - self.y0) / 2)
        return rng.uniform(self.x0 + mx, self.x1 - mx), rng.uniform(self.y0 + my, self.y1 - my)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2


@dataclass
class Area:
    name: str
    type: str
    rect: Rect
    height: float = 0.9


@dataclass
class Container:
    name: str
    type: str
    host_area: str
    rect: Rect
    open: bool = False
    joint_travel: float = 0.4
    height: float = 0.7

    @property
    def handle(self) -> tuple[float, float]:
        return self.rect.center


@dataclass
class WorldObject:
    name: str
    type: str
    pose: Pose
    # ("area", name) | ("container", name) | ("arm", arm) | ("tray", slot index)
    support: tuple[str, object]
    radius: float = DEFAULT_RADIUS


@dataclass
class Tray:
    name: str
    rows: int = 2
    cols: int = 3
    slots: list[Optional[str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.slots:
            self.slots = [None] * (self.rows * self.cols)

    def free_slot(self) -> Optional[int]:
        for i, occupant in enumerate(self.slots):
            if occupant is None:
                return i
        return None

    def slot_offset(self, i: int) -> tuple[float, float]:
        r, c = divmod(i, self.cols)
        return ((c - (self.cols - 1) / 2) * TRAY_SLOT_SPACING,
                (r - (self.rows - 1) / 2) * TRAY_SLOT_SPACING)


@dataclass
class Robot:
    base: Pose
    held: dict[str, Optional[str]] = field(default_factory=lambda: {a: None for a in ARMS})
    keypoints: dict[str, Point] = field(default_factory=dict)

    def __post_init__(self):
        if not self.keypoints:
            self.park_arms()

    def park_pose(self, arm: str) -> Point:
        side = 0.3 if arm == "left" else -0.3
        c, s = math.cos(self.base.theta), math.sin(self.base.theta)
        return Point(self.base.x + 0.25 * c - side * s, self.base.y + 0.25 * s + side * c, 1.0)

    def park_arms(self):
        self.keypoints = {a: self.park_pose(a) for a in ARMS}

    def free_arms(self) -> list[str]:
        return [a for a in ARMS if self.held[a] is None]


class Placement(NamedTuple):
    """A grounded location: where an object will rest and what supports it."""

    pose: Pose
    z: float
    support: tuple[str, object]


@dataclass
class WorldState:
    areas: dict[str, Area]
    containers: dict[str, Container]
    objects: dict[str, WorldObject]
    robot: Robot
    tray: Optional[Tray] = None

    def copy(self) -> "WorldState":
        return copy.deepcopy(self)

    # -- lookup --

    def find_area(self, ref: Designator) -> Optional[Area]:
        ident = reference_identity(ref)
        if ident is None:
            return None
        key, value = ident
        if key == "name":
            return self.areas.get(value)
        return next((a for a in self.areas.values() if a.type == value), None)

    def find_container(self, ref: Designator) -> Optional[Container]:
        ident = reference_identity(ref)
        if ident is None:
            return None
        key, value = ident
        if key == "name":
            return self.containers.get(value)
        return next((c for c in self.containers.values() if c.type == value), None)

    def tray_object(self) -> Optional[WorldObject]:
        return self.objects.get(self.tray.name) if self.tray else None

    def matches(self, obj: WorldObject, desc: Optional[Designator]) -> bool:
        if desc is None:
            return True
        for key in ("type", "name"):
            want = desc.get(key)
            if want is not None and want != getattr(obj, key):
                return False
        return True

    def support_of_location(self, loc: Optional[Designator]) -> Optional[tuple[str, object]]:
        """The direct support an object must have to be found at ``loc``."""
        ref = location_reference(loc)
        if ref is None:
            return None
        rel, target = ref
        if rel == "in":
            c = self.find_container(target)
            return None if c is None else ("container", c.name)
        if target.get("type") == TRAY_TYPE:
            return ("tray", None)
        a = self.find_area(target)
        return None if a is None else ("area", a.name)

    def objects_at(self, desc: Optional[Designator], loc: Optional[Designator]) -> list[WorldObject]:
        """Non-held objects matching ``desc`` directly supported by ``loc``."""
        want = self.support_of_location(loc) if loc is not None else None
        out = []
        for o in self.objects.values():
            if o.support[0] == "arm" or not self.matches(o, desc):
                continue
            if loc is not None:
                if want is None:
                    continue
                if want[0] == "tray":
                    if o.support[0] != "tray":
                        continue
                elif o.support != want:
                    continue
            out.append(o)
        return out

    def position(self, name: str) -> Point:
        o = self.objects[name]
        kind, where = o.support
        if kind == "arm":
            return self.robot.keypoints[where]
        if kind == "tray":
            tray = self.objects[self.tray.name]
            base = self.position(tray.name)
            dx, dy = self.tray.slot_offset(where)
            return Point(base.x + dx, base.y + dy, base.z + TRAY_SURFACE)
        return Point(o.pose.x, o.pose.y, self.support_height(o.support))

    def support_height(self, support) -> float:
        kind, where = support
        if kind == "area":
            return self.areas[where].height
        if kind == "container":
            return self.containers[where].height
        raise ValueError(f"no fixed height for support {support}")

    def support_area(self, name: str) -> Optional[str]:
        """The environment area an object ultimately rests in (through trays
        and containers); None while held."""
        kind, where = self.objects[name].support
        if kind == "area":
            return where
        if kind == "container":
            return self.containers[where].host_area
        if kind == "tray":
            return self.support_area(self.tray.name)
        return None

    def final_supports(self) -> set[tuple[str, Optional[str]]]:
        return {(o.name, self.support_area(o.name)) for o in self.objects.values() if o.type != TRAY_TYPE}

    def holder_of(self, name: str) -> list[str]:
        return [a for a in ARMS if self.robot.held[a] == name]

    # -- placement --

    def collides(self, x: float, y: float, radius: float, support, ignore: str | None = None) -> bool:
        """Footprint overlap with objects resting directly on ``support``."""
        for o in self.objects.values():
            if o.name == ignore or o.support != support:
                continue
            p = self.position(o.name)
            if math.hypot(p.x - x, p.y - y) < o.radius + radius:
                return True
        return False


def ground_location(loc: Designator, world: WorldState, rng: random.Random,
                    radius: float = DEFAULT_RADIUS, ignore: str | None = None) -> Placement:
    """Sample a concrete, collision-free placement for a location designator.

    Area and container locations are sampled uniformly inside their
    rectangle; tray locations take the next free slot in row-major order.
    """
    ref = location_reference(loc)
    if ref is None:
        raise NoSampleFound(f"location does not reference the environment: {loc}")
    rel, target = ref
    if rel == "on" and target.get("type") == TRAY_TYPE:
        if world.tray is None:
            raise NoSampleFound("no tray in this world")
        slot = world.tray.free_slot()
        if slot is None:
            raise NoSampleFound("tray is full")
        tray_pos = world.position(world.tray.name)
        dx, dy = world.tray.slot_offset(slot)
        return Placement(Pose(tray_pos.x + dx, tray_pos.y + dy, 0.0), tray_pos.z + TRAY_SURFACE, ("tray", slot))
    if rel == "in":
        c = world.find_container(target)
        if c is None:
            raise NoSampleFound(f"unknown container {target}")
        rect, z, support = c.rect, c.height, ("container", c.name)
    else:
        a = world.find_area(target)
        if a is None:
            raise NoSampleFound(f"unknown area {target}")
        rect, z, support = a.rect, a.height, ("area", a.name)
    for _ in range(PLACEMENT_TRIES):
        x, y = rect.sample(rng, margin=radius + SURFACE_MARGIN)
        if not world.collides(x, y, radius, support, ignore):
            return Placement(Pose(x, y, rng.uniform(-math.pi, math.pi)), z, support)
    raise NoSampleFound(f"no free placement in {support[1]}")


# -- scenario loading --------------------------------------------------------

def _rect(value, what) -> Rect:
    try:
        x0, y0, x1, y1 = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: rect must be [x0, y0, x1, y1]") from None
    return Rect(x0, y0, x1, y1)


def _pose(value, what) -> Pose:
    try:
        vals = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: pose must be [x, y] or [x, y, theta]") from None
    if len(vals) not in (2, 3):
        raise ConfigError(f"{what}: pose must be [x, y] or [x, y, theta]")
    return Pose(*vals)


def world_from_scenario(data: dict) -> WorldState:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    try:
        areas = {
            name: Area(name, str(a.get("type", "countertop")).lower(), _rect(a["rect"], name),
                       float(a.get("height", 0.9)))
            for name, a in data.get("areas", {}).items()
        }
        containers = {}
        for name, c in data.get("containers", {}).items():
            if c["host_area"] not in areas:
                raise ConfigError(f"container {name}: unknown host area {c['host_area']!r}")
            containers[name] = Container(name, str(c.get("type", name)).lower(), c["host_area"],
                                         _rect(c["rect"], name), bool(c.get("open", False)),
                                         float(c.get("joint_travel", 0.4)), float(c.get("height", 0.7)))
        tray = None
        objects: dict[str, WorldObject] = {}
        tray_cfg = data.get("tray")
        if tray_cfg:
            tname = tray_cfg.get("name", "tray")
            tray = Tray(tname, int(tray_cfg.get("rows", 2)), int(tray_cfg.get("cols", 3)))
            objects[tname] = WorldObject(tname, TRAY_TYPE, _pose(tray_cfg["pose"], tname),
                                         ("area", tray_cfg["support"]), TRAY_RADIUS)
        for name, o in data.get("objects", {}).items():
            sup = o["support"]
            if sup in areas:
                support = ("area", sup)
            elif sup in containers:
                support = ("container", sup)
            elif sup == "tray" and tray is not None:
                slot = tray.free_slot()
                if slot is None:
                    raise ConfigError("too many objects on the tray")
                tray.slots[slot] = name
                support = ("tray", slot)
            else:
                raise ConfigError(f"object {name}: unknown support {sup!r}")
            objects[name] = WorldObject(name, str(o.get("type", name)).lower(), _pose(o.get("pose", [0, 0]), name),
                                        support, float(o.get("radius", DEFAULT_RADIUS)))
        if tray is not None and objects[tray.name].support[1] not in areas:
            raise ConfigError(f"tray: unknown support area {objects[tray.name].support[1]!r}")
        robot_cfg = data.get("robot", {})
        robot = Robot(_pose(robot_cfg.get("base_pose", [0, 0, 0]), "robot"))
    except KeyError as e:
        raise ConfigError(f"scenario is missing field {e}") from None
    except (TypeError, AttributeError, ValueError) as e:
        raise ConfigError(f"malformed scenario: {e}") from None
    return WorldState(areas, containers, objects, robot, tray)


def load_scenario(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from None
