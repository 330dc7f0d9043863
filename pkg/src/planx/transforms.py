"""The built-in transformation rules: both-hands, container and tray.

Each rule is an applicability check that extracts an input schema from the
task tree, and a transformation that writes code replacements guided by it.
Transformations never add or remove task-tree nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from planx.errors import AlreadyTransformed, TrayCapacityExceeded
from planx.plan import Designator, Perform, reference_identity, same_area
from planx.query import QueryEngine, Var, default_engine
from planx.tasktree import SUCCEEDED, CodeReplacement, NodePath, TaskTree, not_transformed

TRAY_SLOTS = 6
TRAY_MIN_DELIVERIES = 3

TRAY_OBJECT = Designator("an", "object", (("type", "tray"),))
TRAY_LOCATION = Designator("a", "location", (("on", TRAY_OBJECT),))

NIL = CodeReplacement(())


@dataclass(frozen=True)
class BothHandsSchema:
    deliver_action: Designator
    deliver_path: NodePath
    second_deliver_path: NodePath

    def summary(self) -> dict:
        return {"deliver_path": str(self.deliver_path), "second_deliver_path": str(self.second_deliver_path)}


@dataclass(frozen=True)
class ContainerTriple:
    open_path: NodePath
    open_action: Designator
    close_path: NodePath


@dataclass(frozen=True)
class ContainerGroup:
    container_id: tuple
    triples: tuple[ContainerTriple, ...]


@dataclass(frozen=True)
class ContainerSchema:
    groups: tuple[ContainerGroup, ...]

    def summary(self) -> dict:
        return {"groups": [{"container": str(g.container_id[1]), "transports": len(g.triples)}
                           for g in self.groups]}


@dataclass(frozen=True)
class TraySchema:
    deliveries: tuple[tuple[NodePath, Designator], ...]
    target_area: Designator

    def summary(self) -> dict:
        return {"deliveries": [str(p) for p, _ in self.deliveries], "target": str(self.target_area)}


_DEFAULT_ENGINE: Optional[QueryEngine] = None


def _engine(engine: Optional[QueryEngine]) -> QueryEngine:
    global _DEFAULT_ENGINE
    if engine is not None:
        return engine
    if _DEFAULT_ENGINE is None:
        _DEFAULT_ENGINE = default_engine()
    return _DEFAULT_ENGINE


# -- both hands ------------------------------------------------------------

def both_hands_applicability(tree: TaskTree, engine: QueryEngine | None = None) -> Optional[BothHandsSchema]:
    goal = "(both_hands_rule Deliver_action Deliver_path Second_deliver_path)"
    for b in _engine(engine).solve(goal, tree):
        return BothHandsSchema(b[Var("Deliver_action")].value, b[Var("Deliver_path")].value,
                               b[Var("Second_deliver_path")].value)
    return None


def apply_both_hands(tree: TaskTree, schema: BothHandsSchema) -> None:
    """Skip the first delivery and perform it right after the second one."""
    first = tree.find_node(schema.deliver_path)
    second = tree.find_node(schema.second_deliver_path)
    for node in (first, second):
        if node.code_replacement is not None:
            raise AlreadyTransformed(str(node.path))
    tree.set_code_replacement(first.path, NIL)
    tree.set_code_replacement(second.path, CodeReplacement((Perform(second.action), Perform(schema.deliver_action))))


# -- container -------------------------------------------------------------

def container_applicability(tree: TaskTree, engine: QueryEngine | None = None) -> Optional[ContainerSchema]:
    goal = "(container_rule Open_path Open_action Close_path)"
    groups: dict[tuple, list[ContainerTriple]] = {}
    for b in _engine(engine).solve(goal, tree):
        triple = ContainerTriple(b[Var("Open_path")].value, b[Var("Open_action")].value, b[Var("Close_path")].value)
        container = triple.open_action.get("object")
        key = reference_identity(container) if isinstance(container, Designator) else None
        triples = groups.setdefault(key, [])
        if triple not in triples:
            triples.append(triple)
    kept = tuple(ContainerGroup(k, tuple(v)) for k, v in groups.items() if len(v) >= 2)
    return ContainerSchema(kept) if kept else None


def apply_container(tree: TaskTree, schema: ContainerSchema) -> None:
    """Open each container once, before its first transport, and close it
    once, after its last."""
    for group in schema.groups:
        for t in group.triples:
            tree.find_node(t.open_path)
            tree.find_node(t.close_path)
        last = len(group.triples) - 1
        for i, t in enumerate(group.triples):
            if i > 0:
                tree.set_code_replacement(t.open_path, NIL)
            if i < last:
                tree.set_code_replacement(t.close_path, NIL)


# -- tray ------------------------------------------------------------------

def _candidate_transports(tree: TaskTree):
    for node in tree:
        if node.name != "transporting" or node.status != SUCCEEDED or node.action is None:
            continue
        obj = node.action.get("object")
        if isinstance(obj, Designator) and obj.get("type") == "tray":
            continue
        if not not_transformed(node):
            continue
        deliver = next(iter(node.children_named("delivering")), None)
        if deliver is None or deliver.action is None:
            continue
        yield node, deliver


def tray_applicability(tree: TaskTree) -> Optional[TraySchema]:
    """First group (in tree order) of at least three untransformed transports
    that share both their fetch area and their delivery area."""
    groups: list[list] = []
    for node, deliver in _candidate_transports(tree):
        loc, target = node.action.get("location"), node.action.get("target")
        for g in groups:
            rep = g[0][0].action
            if same_area(rep.get("location"), loc) and same_area(rep.get("target"), target):
                g.append((node, deliver))
                break
        else:
            groups.append([(node, deliver)])
    for g in groups:
        if len(g) >= TRAY_MIN_DELIVERIES:
            return TraySchema(tuple((d.path, d.action) for _, d in g), g[0][0].action.get("target"))
    return None


def apply_tray(tree: TaskTree, schema: TraySchema) -> None:
    """Deliver every object onto the tray, then carry the tray to the target."""
    n = len(schema.deliveries)
    if n > TRAY_SLOTS:
        raise TrayCapacityExceeded(f"{n} deliveries exceed the {TRAY_SLOTS} tray slots")
    if n < TRAY_MIN_DELIVERIES:
        raise ValueError(f"tray transform needs at least {TRAY_MIN_DELIVERIES} deliveries, got {n}")
    for path, _ in schema.deliveries:
        if tree.find_node(path).code_replacement is not None:
            raise AlreadyTransformed(str(path))
    search_tray = Designator("an", "action", (("type", "searching"), ("object", TRAY_OBJECT)))
    carry_tray = Designator("an", "action", (("type", "transporting"), ("object", TRAY_OBJECT),
                                             ("target", schema.target_area)))
    for i, (path, action) in enumerate(schema.deliveries):
        body = [Perform(search_tray), Perform(action.with_prop("target", TRAY_LOCATION))]
        if i == n - 1:
            body.append(Perform(carry_tray))
        tree.set_code_replacement(path, CodeReplacement(tuple(body)))
