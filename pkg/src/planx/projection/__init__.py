"""Fast plan projection: a simulated 2-D kitchen, the plan interpreter, and
trace-based cost metrics."""

from planx.projection.executor import Projector, SamplingConfig, check_plan, project
from planx.projection.trace import (
    ExecutionTrace, RunMetrics, TraceEvent, count_actions, count_failure_events, manipulation_cost,
    navigation_cost,
)
from planx.projection.world import (
    Placement, Pose, WorldState, ground_location, load_scenario, world_from_scenario,
)

__all__ = [
    "ExecutionTrace", "Placement", "Pose", "Projector", "RunMetrics", "SamplingConfig", "TraceEvent",
    "WorldState", "check_plan", "count_actions", "count_failure_events", "ground_location",
    "load_scenario", "manipulation_cost", "navigation_cost", "project", "world_from_scenario",
]
