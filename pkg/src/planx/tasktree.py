"""Persistent task tree: one node per performed (sub)plan, addressed by a
unique path, with a code-replacement slot consulted on re-execution."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

from planx.errors import ParentNotFound, PathNotFound
from planx.plan import Designator, Perform, PlanExpr, format_body, format_value

log = logging.getLogger(__name__)

ROOT_NAME = "top-level"

CREATED = "created"
SUCCEEDED = "succeeded"
FAILED = "failed"


class Segment(NamedTuple):
    name: str
    call: Optional[int] = None

    def __str__(self):
        return self.name if self.call is None else f"({self.name} :call {self.call})"


@dataclass(frozen=True)
class NodePath:
    """Leaf-first sequence of segments, e.g. ``(transporting :call 2) / top-level``."""

    segments: tuple[Segment, ...]

    @classmethod
    def root(cls) -> "NodePath":
        return cls((Segment(ROOT_NAME),))

    @classmethod
    def parse(cls, text: str) -> "NodePath":
        segs = []
        for part in text.split(" / "):
            part = part.strip()
            if part.startswith("("):
                name, kw, n = part.strip("()").split()
                if kw != ":call":
                    raise ValueError(f"bad path segment {part!r}")
                segs.append(Segment(name, int(n)))
            else:
                segs.append(Segment(part))
        return cls(tuple(segs))

    def child(self, name: str, occurrence: int = 1) -> "NodePath":
        if occurrence < 1:
            raise ValueError("occurrence must be positive")
        return NodePath((Segment(name, None if occurrence == 1 else occurrence),) + self.segments)

    @property
    def parent(self) -> Optional["NodePath"]:
        return NodePath(self.segments[1:]) if len(self.segments) > 1 else None

    @property
    def leaf(self) -> Segment:
        return self.segments[0]

    def __len__(self):
        return len(self.segments)

    def __str__(self):
        return " / ".join(map(str, self.segments))


@dataclass
class CodeReplacement:
    """Alternative body for a node; an empty body means "skip" (nil)."""

    body: tuple[PlanExpr, ...] = ()

    def __post_init__(self):
        self.body = tuple(self.body)
        if not all(isinstance(e, Perform) for e in self.body):
            raise TypeError("code replacements may only contain perform expressions")

    @property
    def is_nil(self) -> bool:
        return not self.body

    def __str__(self):
        return "nil" if self.is_nil else format_body(self.body)


@dataclass(eq=False)
class TaskTreeNode:
    name: str
    path: NodePath
    action: Optional[Designator] = None
    code_replacement: Optional[CodeReplacement] = None
    children: list["TaskTreeNode"] = field(default_factory=list)
    status: str = CREATED

    def walk(self) -> Iterator["TaskTreeNode"]:
        """Pre-order traversal."""
        yield self
        for c in self.children:
            yield from c.walk()

    def child(self, name: str, occurrence: int = 1) -> Optional["TaskTreeNode"]:
        want = Segment(name, None if occurrence == 1 else occurrence)
        for c in self.children:
            if c.path.leaf == want:
                return c
        return None

    def children_named(self, name: str) -> list["TaskTreeNode"]:
        return [c for c in self.children if c.name == name]

    def __repr__(self):
        return f"<TaskTreeNode {self.path}>"


def not_transformed(node: TaskTreeNode) -> bool:
    """True iff neither the node nor any descendant carries a code replacement."""
    return all(n.code_replacement is None for n in node.walk())


class TaskTree:
    def __init__(self, plan_name: str | None = None):
        self.plan_name = plan_name
        self.root = TaskTreeNode(ROOT_NAME, NodePath.root())
        self._index: dict[NodePath, TaskTreeNode] = {self.root.path: self.root}
        self.warnings: list[str] = []

    def __len__(self):
        return len(self._index)

    def __iter__(self) -> Iterator[TaskTreeNode]:
        return self.root.walk()

    def paths(self) -> list[NodePath]:
        return [n.path for n in self]

    def ensure_child(self, parent_path: NodePath, name: str, occurrence: int = 1) -> NodePath:
        parent = self._index.get(parent_path)
        if parent is None:
            raise ParentNotFound(parent_path)
        path = parent_path.child(name, occurrence)
        if path not in self._index:
            node = TaskTreeNode(name, path)
            parent.children.append(node)
            self._index[path] = node
        return path

    def find_node(self, path: NodePath) -> TaskTreeNode:
        try:
            return self._index[path]
        except KeyError:
            raise PathNotFound(path) from None

    def __contains__(self, path: NodePath):
        return path in self._index

    def set_code_replacement(self, path: NodePath, code: CodeReplacement) -> None:
        node = self.find_node(path)
        if node.code_replacement is not None:
            msg = f"overwriting code replacement of {path}"
            self.warnings.append(msg)
            log.warning(msg)
        node.code_replacement = code

    def clear_code_replacements(self) -> None:
        for n in self:
            n.code_replacement = None

    def replacements(self) -> dict[NodePath, CodeReplacement]:
        return {n.path: n.code_replacement for n in self if n.code_replacement is not None}

    def to_dict(self, node: TaskTreeNode | None = None) -> dict:
        """Dump format used by ``--dump-tree``."""
        node = node or self.root
        return {
            "name": node.name,
            "call": node.path.leaf.call,
            "path": str(node.path),
            "action": None if node.action is None else format_value(node.action),
            "replacement": None if node.code_replacement is None else str(node.code_replacement),
            "status": node.status,
            "children": [self.to_dict(c) for c in node.children],
        }

