"""Execution traces and the cost metrics computed from them."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Optional

ACTION_START = "action-start"
ACTION_END = "action-end"
MOTION = "motion"
FAILURE = "failure"
RECOVERY = "recovery"
KINDS = (ACTION_START, ACTION_END, MOTION, FAILURE, RECOVERY)


@dataclass
class TraceEvent:
    kind: str
    path: str
    detail: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "path": self.path, "detail": self.detail})


@dataclass
class ExecutionTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def log(self, kind: str, path, **detail) -> TraceEvent:
        ev = TraceEvent(kind, str(path), detail)
        self.events.append(ev)
        return ev

    def base_motion(self, path, frm, to):
        self.log(MOTION, path, base_from=list(frm), base_to=list(to))

    def arm_motion(self, path, arm: str, frm, to):
        self.log(MOTION, path, arm=arm, keypoint_from=list(frm), keypoint_to=list(to))

    def starts(self, action_type: Optional[str] = None) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == ACTION_START
                and (action_type is None or e.detail.get("type") == action_type)]

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    @classmethod
    def from_jsonl(cls, text: str) -> "ExecutionTrace":
        events = []
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                events.append(TraceEvent(d["kind"], d["path"], d.get("detail", {})))
        return cls(events)

    def is_well_nested(self) -> bool:
        depth = 0
        for e in self.events:
            if e.kind == ACTION_START:
                depth += 1
            elif e.kind == ACTION_END:
                depth -= 1
                if depth < 0:
                    return False
        return depth == 0


def _events(trace) -> Iterable[TraceEvent]:
    return trace.events if isinstance(trace, ExecutionTrace) else trace


def navigation_cost(trace) -> float:
    """Summed straight-line length of all base motions."""
    return math.fsum(math.dist(e.detail["base_from"][:2], e.detail["base_to"][:2])
                     for e in _events(trace) if e.kind == MOTION and "base_from" in e.detail)


def manipulation_cost(trace) -> float:
    """Summed straight-line length of all gripper keypoint motions."""
    return math.fsum(math.dist(e.detail["keypoint_from"], e.detail["keypoint_to"])
                     for e in _events(trace) if e.kind == MOTION and "keypoint_from" in e.detail)


def count_actions(trace) -> int:
    return sum(1 for e in _events(trace) if e.kind == ACTION_START)


def count_failure_events(trace) -> int:
    return sum(1 for e in _events(trace) if e.kind == FAILURE)


@dataclass(frozen=True)
class RunMetrics:
    navigation_cost: float
    manipulation_cost: float
    action_count: int
    failure_event_count: int
    plan_failed: bool

    @classmethod
    def from_trace(cls, trace: ExecutionTrace, plan_failed: bool) -> "RunMetrics":
        return cls(navigation_cost(trace), manipulation_cost(trace), count_actions(trace),
                   count_failure_events(trace), plan_failed)

    def as_dict(self) -> dict:
        return asdict(self)
