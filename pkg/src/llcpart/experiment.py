"""Workload generation, multi-policy experiments and report formatting."""
from __future__ import annotations

import csv
import io
import json
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from .dynsim import SimConfig, run_simulation
from .errors import ConfigError, LlcPartError
from .metrics import ClusterAssignment, evaluate
from .optimal import Objective, SearchMode, solve_optimal
from .policies import (DEFAULT_PARAMS, AppClass, LfocParams, baseline_assignments, classify,
                       lfoc_from_profiles)
from .profiles import AppProfile, CacheConfig, PhaseTrace, WorkloadSpec

STATIC_POLICIES = ("lfoc", "none", "equal_partition", "best_static", "optimal_partitioning")
DYNAMIC_POLICIES = ("lfoc", "none", "equal_partition", "best_static")
CLASS_ORDER = (AppClass.STREAMING, AppClass.SENSITIVE, AppClass.LIGHT_SHARING)


def gen_workload(pool: Sequence[AppProfile], n_apps: int, class_mix: Sequence[int], seed: int,
                 cache: CacheConfig | None = None, params: LfocParams = DEFAULT_PARAMS,
                 name: str | None = None) -> WorkloadSpec:
    """Random workload with ``class_mix = (streaming, sensitive, light)`` instances.

    Draws with replacement inside each class bucket. The result depends only
    on ``(pool, n_apps, class_mix, seed)``.
    """
    mix = tuple(int(x) for x in class_mix)
    if len(mix) != 3 or any(x < 0 for x in mix):
        raise ConfigError(f"class mix must be three non-negative counts, got {class_mix!r}")
    if sum(mix) != n_apps:
        raise ConfigError(f"class mix {mix} sums to {sum(mix)}, expected {n_apps} apps")
    if n_apps < 1:
        raise ConfigError("a workload needs at least one app")
    buckets = {c: [] for c in CLASS_ORDER}
    for p in pool:
        cls = classify(p, params)
        if cls in buckets:
            buckets[cls].append(p)
    rng = random.Random(seed)
    apps = []
    for cls, count in zip(CLASS_ORDER, mix):
        if count and not buckets[cls]:
            raise ConfigError(f"profile pool has no {cls.value} application")
        apps.extend(rng.choice(buckets[cls]) for _ in range(count))
    if cache is None:
        cache = CacheConfig(nr_ways=apps[0].nr_ways)
    return WorkloadSpec(tuple(apps), cache, name or f"wl{n_apps}_s{seed}")


def instance_counts(workload: WorkloadSpec) -> dict:
    """Instances per benchmark name, in first-appearance order."""
    return dict(Counter(workload.names))


@dataclass
class ExperimentSpec:
    workloads: list
    policies: list
    mode: str = "static"
    seed: int = 0
    output: str | None = None
    params: LfocParams = DEFAULT_PARAMS
    total_instructions: int | None = None
    sim: SimConfig | None = None
    baseline: str = "none"
    workers: int = 1

    def validate(self):
        if not self.workloads:
            raise ConfigError("experiment needs at least one workload")
        if not self.policies:
            raise ConfigError("experiment needs at least one policy")
        if self.mode not in ("static", "dynamic"):
            raise ConfigError(f"mode must be static or dynamic, got {self.mode!r}")
        allowed = STATIC_POLICIES if self.mode == "static" else DYNAMIC_POLICIES
        bad = [p for p in self.policies if p not in allowed]
        if bad:
            raise ConfigError(f"unsupported {self.mode} policies {bad}; choose from {allowed}")
        if self.baseline not in allowed:
            raise ConfigError(f"baseline {self.baseline!r} is not a {self.mode} policy")
        if self.mode == "dynamic" and self.total_instructions is None:
            for wl in self.workloads:
                if not all(isinstance(a, PhaseTrace) for a in wl.apps):
                    raise ConfigError(f"{wl.name}: dynamic mode needs phase traces "
                                      "(or total_instructions for static profiles)")


@dataclass
class ReportRow:
    workload: str
    policy: str
    unfairness: float
    stp: float
    normalized_unfairness: float
    normalized_stp: float
    wall_time_ms: float
    algorithm_invocations: int

    def to_dict(self) -> dict:
        return asdict(self)


ROW_FIELDS = tuple(f.name for f in fields(ReportRow))


def static_assignment(workload: WorkloadSpec, policy: str,
                      params: LfocParams = DEFAULT_PARAMS) -> ClusterAssignment:
    """The fixed assignment a static policy picks for ``workload``."""
    if policy in ("none", "equal_partition"):
        return baseline_assignments(workload.n, workload.k, policy)
    if policy == "lfoc":
        return lfoc_from_profiles(workload.profiles, workload.k, params)[0]
    mode = SearchMode.CLUSTERING if policy == "best_static" else SearchMode.PARTITIONING
    if policy not in ("best_static", "optimal_partitioning"):
        raise ConfigError(f"unknown static policy {policy!r}")
    return solve_optimal(workload, Objective.FAIRNESS, mode).assignment


def _cell(args):
    spec, wl, policy = args
    t0 = time.perf_counter()
    try:
        if spec.mode == "static":
            a = static_assignment(wl, policy, spec.params)
            r = evaluate(a, wl)
            unf, thr = r.unfairness, r.stp
            calls = 0 if policy in ("none", "equal_partition") else 1
        else:
            cfg = spec.sim or SimConfig(params=spec.params)
            pol = "best_static_oracle" if policy == "best_static" else policy
            rep = run_simulation(wl, pol, cfg, spec.seed, spec.total_instructions)
            unf, thr, calls = rep.unfairness, rep.stp, rep.algorithm_invocations
    except LlcPartError as exc:
        raise LlcPartError(f"{wl.name}/{policy}: {exc}") from exc
    return unf, thr, (time.perf_counter() - t0) * 1000.0, calls


def run_experiment(spec: ExperimentSpec) -> list:
    """Evaluate every (workload, policy) cell and normalize against the baseline."""
    spec.validate()
    order = list(dict.fromkeys(spec.policies))
    needed = order if spec.baseline in order else order + [spec.baseline]
    cells = [(spec, wl, p) for wl in spec.workloads for p in needed]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]
    rows = []
    it = iter(results)
    for wl in spec.workloads:
        got = {p: next(it) for p in needed}
        base_unf, base_stp = got[spec.baseline][0], got[spec.baseline][1]
        for p in order:
            unf, thr, ms, calls = got[p]
            rows.append(ReportRow(wl.name, p, unf, thr, unf / base_unf, thr / base_stp, ms, calls))
    return rows


def rows_from_dicts(items) -> list:
    try:
        return [ReportRow(**{k: d[k] for k in ROW_FIELDS}) for d in items]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed report rows: {exc}") from None


def report(rows: Sequence[ReportRow], fmt: str = "json", metric: str = "normalized_unfairness") -> str:
    """Render rows as ``json``, ``csv`` or grouped-bar ``plotdata``."""
    if fmt == "json":
        return json.dumps([r.to_dict() for r in rows], indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([getattr(r, f) for f in ROW_FIELDS])
        return buf.getvalue()
    if fmt == "plotdata":
        if metric not in ROW_FIELDS[2:]:
            raise ConfigError(f"unknown metric {metric!r}")
        groups = list(dict.fromkeys(r.workload for r in rows))
        series = list(dict.fromkeys(r.policy for r in rows))
        cell = {(r.workload, r.policy): getattr(r, metric) for r in rows}
        out = {
            "metric": metric,
            "x": groups,
            "series": {p: [cell.get((g, p)) for g in groups] for p in series},
        }
        return json.dumps(out, indent=2) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")
