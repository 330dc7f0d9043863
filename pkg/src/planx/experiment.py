"""Seeded baseline-vs-transformed experiments and their reports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from planx.errors import ConfigError
from planx.framework import Application, registry_for
from planx.plan import PlanDef, parse_plan
from planx.projection import ExecutionTrace, RunMetrics, SamplingConfig, project, world_from_scenario
from planx.projection.world import WorldState, load_scenario
from planx.query import default_engine
from planx.stats import histogram, mean, sample_std, welch_t_test
from planx.tasktree import TaskTree

METRICS = ("navigation_cost", "manipulation_cost", "action_count", "failure_event_count")
CSV_COLUMNS = ("trial", "variant", "nav_cost", "manip_cost", "actions", "failure_events", "plan_failed")
VARIANTS = ("baseline", "transformed")


@dataclass
class ExperimentConfig:
    plan_file: str
    scenario_file: str
    top_level: Optional[str] = None
    trials: int = 200
    base_seed: int = 0
    transforms: list[str] = field(default_factory=list)
    paired: bool = True
    failure_free: bool = False
    rules_file: Optional[str] = None
    out: Optional[str] = None
    csv: Optional[str] = None
    hist: Optional[str] = None
    dump_tree: Optional[str] = None
    dump_trace: Optional[str] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")

    def describe(self) -> dict:
        return {
            "plan": self.plan_file, "scenario": self.scenario_file, "top_level": self.top_level,
            "trials": self.trials, "base_seed": self.base_seed, "transforms": list(self.transforms),
            "paired": self.paired, "failure_free": self.failure_free, "rules": self.rules_file,
        }


@dataclass
class Trial:
    """Everything produced by one paired trial."""

    baseline: RunMetrics
    transformed: RunMetrics
    applications: list[Application]
    tree: TaskTree
    trace: ExecutionTrace
    baseline_world: WorldState
    transformed_world: WorldState


@dataclass
class Report:
    config: dict
    baseline: list[RunMetrics]
    transformed: list[RunMetrics]
    applications: list[list[Application]]
    # trial 0 artifacts for --dump-tree / --dump-trace
    first_tree: Optional[TaskTree] = None
    first_trace: Optional[ExecutionTrace] = None

    def values(self, variant: str, metric: str) -> list[float]:
        runs = self.baseline if variant == "baseline" else self.transformed
        return [getattr(m, metric) for m in runs]

    def summary(self) -> dict:
        out = {}
        for metric in METRICS:
            entry = {}
            for v in VARIANTS:
                xs = self.values(v, metric)
                entry[v] = {"mean": mean(xs), "std": sample_std(xs)}
            b = entry["baseline"]["mean"]
            entry["relative_delta"] = (entry["transformed"]["mean"] - b) / b if b else None
            out[metric] = entry
        return out

    def t_tests(self) -> dict:
        out = {}
        for metric in METRICS:
            xs, ys = self.values("baseline", metric), self.values("transformed", metric)
            out[metric] = welch_t_test(ys, xs).as_dict() if len(xs) >= 2 and len(ys) >= 2 else None
        return out

    def failures(self) -> dict:
        return {
            v: {
                "plan_failure_fraction": mean([float(m.plan_failed) for m in runs]),
                "mean_failure_events": mean([m.failure_event_count for m in runs]),
            }
            for v, runs in zip(VARIANTS, (self.baseline, self.transformed))
        }

    def application_summary(self) -> dict:
        counts: dict[str, int] = {}
        for apps in self.applications:
            for a in apps:
                counts[a.name] = counts.get(a.name, 0) + 1
        return {
            "first_trial": [{"transform": a.name, "schema": a.summary} for a in self.applications[0]],
            "per_trial": [[a.name for a in apps] for apps in self.applications],
            "totals": counts,
        }

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "trials": len(self.baseline),
            "variants": {
                "baseline": [m.as_dict() for m in self.baseline],
                "transformed": [m.as_dict() for m in self.transformed],
            },
            "summary": self.summary(),
            "t_test": self.t_tests(),
            "failures": self.failures(),
            "applications": self.application_summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def histograms(self, bins: int = 20) -> dict:
        return {metric: histogram({v: self.values(v, metric) for v in VARIANTS}, bins) for metric in METRICS}


class Experiment:
    """Loaded plan, scenario and transformation pipeline, ready to run trials."""

    def __init__(self, plan: PlanDef, scenario: dict, transforms=(), rules: str | None = None,
                 failure_free: bool = False):
        self.plan = plan
        self.world = world_from_scenario(scenario)
        self.sampling = SamplingConfig.from_dict(scenario.get("sampling"))
        if failure_free:
            self.sampling = self.sampling.failure_free()
        self.transforms = list(transforms)
        self.engine = default_engine(rules)
        registry_for(self.transforms, self.engine)  # validates names and precedence up front

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "Experiment":
        plan = parse_plan(_read(cfg.plan_file), cfg.top_level)
        rules = _read(cfg.rules_file) if cfg.rules_file else None
        return cls(plan, load_scenario(cfg.scenario_file), cfg.transforms, rules, cfg.failure_free)

    def baseline(self, seed: int):
        world = self.world.copy()
        tree, trace, metrics = project(self.plan, world, self.sampling.with_seed(seed), TaskTree())
        return tree, trace, metrics, world

    def transformed(self, seed: int):
        """Project once to build the tree, transform it, then project again."""
        cfg = self.sampling.with_seed(seed)
        tree, _, _ = project(self.plan, self.world.copy(), cfg, TaskTree())
        applications = registry_for(self.transforms, self.engine).apply_all_transformations(tree)
        world = self.world.copy()
        tree, trace, metrics = project(self.plan, world, cfg, tree)
        return tree, trace, metrics, world, applications

    def trial(self, seed: int, transformed_seed: int | None = None) -> Trial:
        _, _, base, base_world = self.baseline(seed)
        tree, trace, metrics, world, apps = self.transformed(seed if transformed_seed is None else transformed_seed)
        return Trial(base, metrics, apps, tree, trace, base_world, world)


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None


def run_experiment(cfg: ExperimentConfig) -> Report:
    exp = Experiment.from_config(cfg)
    baseline, transformed, applications = [], [], []
    first = None
    for i in range(cfg.trials):
        seed = cfg.base_seed + i
        t_seed = seed if cfg.paired else cfg.base_seed + cfg.trials + i
        trial = exp.trial(seed, t_seed)
        if first is None:
            first = trial
        baseline.append(trial.baseline)
        transformed.append(trial.transformed)
        applications.append(trial.applications)
    return Report(cfg.describe(), baseline, transformed, applications, first.tree, first.trace)


def write_report(report: Report, out=None, csv_path=None, hist=None, bins: int = 20) -> None:
    try:
        if out:
            Path(out).write_text(report.to_json())
        if csv_path:
            with open(csv_path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(CSV_COLUMNS)
                for variant, runs in zip(VARIANTS, (report.baseline, report.transformed)):
                    for i, m in enumerate(runs):
                        w.writerow([i, variant, repr(m.navigation_cost), repr(m.manipulation_cost),
                                    m.action_count, m.failure_event_count, int(m.plan_failed)])
        if hist:
            Path(hist).write_text(json.dumps(report.histograms(bins), indent=2) + "\n")
    except OSError as e:
        raise ConfigError(f"cannot write report: {e}") from e


def read_csv(path) -> dict[str, list[RunMetrics]]:
    out: dict[str, list[RunMetrics]] = {v: [] for v in VARIANTS}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out[row["variant"]].append(RunMetrics(float(row["nav_cost"]), float(row["manip_cost"]),
                                                  int(row["actions"]), int(row["failure_events"]),
                                                  bool(int(row["plan_failed"]))))
    return out
