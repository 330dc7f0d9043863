"""Exception types shared across the package."""

from __future__ import annotations


class PlanxError(Exception):
    """Base class for every error raised by planx."""


class ParseError(PlanxError):
    def __init__(self, reason: str, line: int = 0, column: int = 0):
        self.reason = reason
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {reason}")


class KeyNotFound(PlanxError, LookupError):
    def __init__(self, keypath):
        self.keypath = tuple(keypath)
        super().__init__(f"key path not found: {' '.join(self.keypath)}")


class PathNotFound(PlanxError, LookupError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"no task-tree node at path: {path}")


class ParentNotFound(PathNotFound):
    pass


class NameCollision(PlanxError):
    pass


class UnknownPredicate(PlanxError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown predicate: {name}")


class UnknownTransformation(PlanxError, LookupError):
    pass


class CycleDetected(PlanxError):
    pass


class FixpointBoundExceeded(PlanxError):
    pass


class AlreadyTransformed(PlanxError):
    pass


class TrayCapacityExceeded(PlanxError):
    pass


class NoSampleFound(PlanxError):
    pass


class PlanFailure(PlanxError):
    """Raised inside a projection when an action exhausts its recovery options."""

    def __init__(self, node_path: str, reason: str):
        self.node_path = node_path
        self.reason = reason
        super().__init__(f"{node_path}: {reason}")


class ConfigError(PlanxError):
    pass
