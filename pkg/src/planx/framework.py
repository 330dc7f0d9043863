"""Transformation registry and the apply-all pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

from planx import transforms
from planx.errors import CycleDetected, FixpointBoundExceeded, NameCollision, UnknownTransformation
from planx.query import QueryEngine
from planx.tasktree import TaskTree

log = logging.getLogger(__name__)

FIXPOINT_BOUND = 100


@dataclass
class Transformation:
    name: str
    applicability: Callable[[TaskTree], Optional[Any]]
    transform: Callable[[TaskTree, Any], None]
    enabled: bool = True


@dataclass(frozen=True)
class Application:
    name: str
    summary: dict


class Registry:
    def __init__(self):
        self.entries: dict[str, Transformation] = {}
        self.precedence: set[tuple[str, str]] = set()

    def register_transformation(self, t: Transformation) -> None:
        if t.name in self.entries:
            raise NameCollision(f"transformation {t.name!r} is already registered")
        self.entries[t.name] = t

    def _get(self, name: str) -> Transformation:
        try:
            return self.entries[name]
        except KeyError:
            raise UnknownTransformation(name) from None

    def enable_transformation(self, name: str) -> None:
        self._get(name).enabled = True

    def disable_transformation(self, name: str) -> None:
        self._get(name).enabled = False

    def prioritize_transformation(self, superior: str, inferior: str) -> None:
        self._get(superior)
        self._get(inferior)
        edges = self.precedence | {(superior, inferior)}
        if _has_cycle(self.entries, edges):
            raise CycleDetected(f"{superior} > {inferior} creates a precedence cycle")
        self.precedence = edges

    def order(self) -> list[str]:
        """Topological order of all entries; ties broken by registration order."""
        names = list(self.entries)
        indeg = {n: 0 for n in names}
        for _, inf in self.precedence:
            indeg[inf] += 1
        out = []
        while len(out) < len(names):
            ready = next(n for n in names if indeg[n] == 0 and n not in out)
            out.append(ready)
            for sup, inf in self.precedence:
                if sup == ready:
                    indeg[inf] -= 1
        return out

    def apply_all_transformations(self, tree: TaskTree) -> list[Application]:
        """Run every enabled transformation in precedence order, each one
        repeatedly until its applicability finds nothing more."""
        report = []
        for name in self.order():
            t = self.entries[name]
            if not t.enabled:
                continue
            for _ in range(FIXPOINT_BOUND):
                schema = t.applicability(tree)
                if schema is None:
                    break
                t.transform(tree, schema)
                summary = schema.summary() if hasattr(schema, "summary") else {}
                log.info("applied %s: %s", name, summary)
                report.append(Application(name, summary))
            else:
                raise FixpointBoundExceeded(f"{name} still applicable after {FIXPOINT_BOUND} rounds")
        return report


def _has_cycle(nodes, edges) -> bool:
    succ = {n: [i for s, i in edges if s == n] for n in nodes}
    state = dict.fromkeys(nodes, 0)

    def visit(n):
        state[n] = 1
        for m in succ[n]:
            if state[m] == 1 or (state[m] == 0 and visit(m)):
                return True
        state[n] = 2
        return False

    return any(state[n] == 0 and visit(n) for n in nodes)


BUILTIN_NAMES = ("both-hands", "container", "tray")


def builtin_transformation(name: str, engine: QueryEngine | None = None) -> Transformation:
    if name == "both-hands":
        return Transformation(name, lambda tree: transforms.both_hands_applicability(tree, engine),
                              transforms.apply_both_hands)
    if name == "container":
        return Transformation(name, lambda tree: transforms.container_applicability(tree, engine),
                              transforms.apply_container)
    if name == "tray":
        return Transformation(name, transforms.tray_applicability, transforms.apply_tray)
    raise UnknownTransformation(name)


def registry_for(names, engine: QueryEngine | None = None) -> Registry:
    """Register ``names`` in order, each one superior to the next."""
    reg = Registry()
    names = list(names)
    for n in names:
        reg.register_transformation(builtin_transformation(n, engine))
    for sup, inf in zip(names, names[1:]):
        reg.prioritize_transformation(sup, inf)
    return reg
