"""Discrete-time simulation of LFOC's online loop over phase traces.

Time advances in fixed ticks. Every tick each app retires
``IPC(effective ways) * clock * tick`` instructions, accumulating per-window
counters (cycles, LLC misses, stall cycles). A monitoring sample fires when
an app's window reaches ``normal_window`` instructions (``sampling_window``
while it is being swept). Under ``policy="lfoc"`` the samples drive the
warm-up / sampling / change-detection state machine and the clustering
algorithm re-runs every ``repartition_period`` seconds of simulated time.

Completion-time slowdowns compare each app against a solo run of the same
trace with the whole cache, simulated with the same machinery.
"""
from __future__ import annotations

import enum
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError, FeasibilityError, SimulationError
from .metrics import (ClusterAssignment, _bandwidth_peak, cluster_slowdowns, miss_rate, stp,
                      unfairness)
from .policies import (DEFAULT_PARAMS, AppClass, LfocParams, baseline_assignments,
                       classify_tables, critical_size, lfoc_partition)
from .profiles import PhaseTrace, WorkloadSpec, interpolate

POLICIES = ("lfoc", "none", "equal_partition", "best_static_oracle")


class Mode(str, enum.Enum):
    WARMUP = "warmup"
    QUEUED = "queued"
    NORMAL = "normal"
    SAMPLING = "sampling"


@dataclass(frozen=True)
class Sweep:
    """In-progress way sweep: samples gathered at 1..len(ipcs) ways."""

    ways: int = 1
    ipcs: tuple = ()
    llcs: tuple = ()
    flat_run: int = 0


@dataclass(frozen=True)
class SweepResult:
    cls: AppClass
    slowdown: tuple
    llcmpkc: tuple
    steps: int
    reason: str


def _finish(ipcs, llcs, nr_ways, params, reason):
    # extend flat from the last sample up to the full cache
    pad = nr_ways - len(ipcs)
    ipc_full = list(ipcs) + [ipcs[-1]] * pad
    llc_full = list(llcs) + [llcs[-1]] * pad
    full = ipc_full[-1]
    slowdown = tuple(max(1.0, full / v) for v in ipc_full)
    return SweepResult(classify_tables(slowdown, llc_full, params), slowdown, tuple(llc_full),
                       len(ipcs), reason)


def sampling_sweep_step(sweep: Sweep, ipc: float, llcmpkc: float, nr_ways: int,
                        params: LfocParams = DEFAULT_PARAMS, max_ways: int | None = None):
    """Fold one sample taken at ``sweep.ways`` ways into the sweep.

    Returns the next :class:`Sweep` (one more way) or a :class:`SweepResult`.
    The sweep stops early when the miss rate drops below the low threshold,
    or when the curve so far already classifies as streaming after
    ``stream_flat_steps`` consecutive steps of IPC gain below
    ``streaming_slowdown_lo``. ``max_ways`` caps the sweep (a co-running
    workload leaves at most ``k - 1`` ways for the sampling partition).
    """
    top = nr_ways if max_ways is None else max_ways
    ipcs = sweep.ipcs + (float(ipc),)
    llcs = sweep.llcs + (float(llcmpkc),)
    flat = sweep.flat_run
    if len(ipcs) >= 2:
        flat = flat + 1 if ipcs[-1] / ipcs[-2] < params.streaming_slowdown_lo else 0
    if params.early_stop:
        if llcmpkc < params.low_threshold:
            return _finish(ipcs, llcs, nr_ways, params, "low_miss")
        if flat >= params.stream_flat_steps:
            res = _finish(ipcs, llcs, nr_ways, params, "streaming")
            if res.cls is AppClass.STREAMING:
                return res
    if sweep.ways >= top:
        return _finish(ipcs, llcs, nr_ways, params, "full")
    return Sweep(sweep.ways + 1, ipcs, llcs, flat)


@dataclass
class AppRuntimeState:
    cls: AppClass = AppClass.UNKNOWN
    mode: Mode = Mode.WARMUP
    history: deque = field(default_factory=deque)
    slowdown_table: tuple | None = None
    llcmpkc_table: tuple | None = None
    critical_size: int | None = None
    sweep: Sweep | None = None
    warmup_left: int = 0
    instructions_retired: float = 0.0
    position: float = 0.0
    completions: int = 0
    completion_times: list = field(default_factory=list)
    run_start: float = 0.0
    # monitoring window accumulators
    win_instr: float = 0.0
    win_cycles: float = 0.0
    win_misses: float = 0.0
    win_stalls: float = 0.0
    segment: int = 0
    samples_since_segment: int = 0

    def means(self):
        h = self.history
        return (sum(x[0] for x in h) / len(h), sum(x[1] for x in h) / len(h))


def detect_class_change(state: AppRuntimeState, effective_ways: float,
                        params: LfocParams = DEFAULT_PARAMS) -> bool:
    """Heuristic class-change signal from the averaged monitoring history."""
    if len(state.history) < params.history_len:
        return False
    llc, stall = state.means()
    memory_intensive = llc >= params.high_threshold or stall > params.stall_threshold
    if state.cls is AppClass.LIGHT_SHARING:
        return memory_intensive
    if state.cls is AppClass.STREAMING:
        return llc < params.low_threshold
    if state.cls is AppClass.SENSITIVE:
        crit = state.critical_size if state.critical_size is not None else 0
        if not memory_intensive and effective_ways < crit:
            return True
        return llc > params.high_threshold and effective_ways > crit
    return False


@dataclass
class SimConfig:
    tick: float = 1e-3
    params: LfocParams = DEFAULT_PARAMS
    completions_target: int = 3
    bandwidth_model: str = "off"
    noise: float = 0.0
    max_time: float = 3600.0
    mean: str = "geometric"
    record_samples: bool = False

    def __post_init__(self):
        if not self.tick > 0:
            raise ConfigError("tick must be positive")
        if self.completions_target < 1:
            raise ConfigError("completions_target must be >= 1")
        if self.mean not in ("geometric", "arithmetic"):
            raise ConfigError("mean must be 'geometric' or 'arithmetic'")


@dataclass
class SimReport:
    policy: str
    names: list
    completion_times: list
    solo_times: list
    mean_times: list
    solo_mean_times: list
    slowdowns: list
    unfairness: float
    stp: float
    class_transitions: list
    change_signals: list
    assignment_log: list
    algorithm_invocations: int
    sweep_steps: int
    sampling_passes: int
    end_time: float
    samples: list = field(default_factory=list)
    final_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "per_app": [
                {"name": n, "completion_times": ct, "mean_time": mt, "solo_mean_time": st,
                 "slowdown": s}
                for n, ct, mt, st, s in zip(self.names, self.completion_times, self.mean_times,
                                            self.solo_mean_times, self.slowdowns)
            ],
            "unfairness": self.unfairness,
            "stp": self.stp,
            "class_transitions": [list(t) for t in self.class_transitions],
            "change_signals": [list(t) for t in self.change_signals],
            "assignment_log": [[tick, a.to_dict()] for tick, a in self.assignment_log],
            "algorithm_invocations": self.algorithm_invocations,
            "sweep_steps": self.sweep_steps,
            "sampling_passes": self.sampling_passes,
            "end_time": self.end_time,
            "final_classes": [str(c) for c in self.final_classes],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _mean(values, kind):
    if kind == "arithmetic":
        return sum(values) / len(values)
    return math.exp(sum(math.log(v) for v in values) / len(values))


class _Simulation:
    def __init__(self, traces: Sequence[PhaseTrace], cache, policy: str, config: SimConfig, seed: int,
                 static_assignment: ClusterAssignment | None = None):
        self.traces = list(traces)
        self.n = len(traces)
        self.cache = cache
        self.k = cache.nr_ways
        self.policy = policy
        self.cfg = config
        self.params = config.params
        self.rng = random.Random(seed)
        all_tables = [s.tables for t in self.traces for s in t.segments]
        self.peak = _bandwidth_peak(all_tables, cache, config.bandwidth_model)
        self.states = [AppRuntimeState(warmup_left=self.params.warmup_periods,
                                       history=deque(maxlen=self.params.history_len))
                       for _ in range(self.n)]
        self.queue: deque = deque()
        self.sampler: int | None = None
        self.policy_assignment = static_assignment
        self.enforced: ClusterAssignment | None = None
        self._rate_cache: dict = {}
        self.tick_no = 0
        self.transitions: list = []
        self.signals: list = []
        self.assignment_log: list = []
        self.samples: list = []
        self.invocations = 0
        self.sweep_steps = 0
        self.sampling_passes = 0

    # -- assignments --------------------------------------------------------

    def _now(self):
        return self.tick_no * self.cfg.tick

    def _repartition(self):
        self.invocations += 1
        known = [i for i, s in enumerate(self.states) if s.cls is not AppClass.UNKNOWN]
        unknown = [i for i, s in enumerate(self.states) if s.cls is AppClass.UNKNOWN]
        if not known:
            self.policy_assignment = ClusterAssignment((tuple(range(self.n)),), (self.k,))
            return
        st = [i for i in known if self.states[i].cls is AppClass.STREAMING]
        cs = [i for i in known if self.states[i].cls is AppClass.SENSITIVE]
        ls = [i for i in known if self.states[i].cls is AppClass.LIGHT_SHARING]
        tables = {i: self.states[i].slowdown_table for i in cs}
        try:
            part = lfoc_partition(st, cs, ls, self.k, tables, self.params)
        except FeasibilityError as exc:
            raise SimulationError(f"lfoc infeasible: {exc}", self._now()) from exc
        clusters = [list(c) for c in part.clusters]
        if unknown:
            # apps not yet classified join the largest cluster
            big = max(range(len(clusters)), key=lambda c: (part.ways[c], -c))
            clusters[big].extend(unknown)
        self.policy_assignment = ClusterAssignment(tuple(tuple(c) for c in clusters), part.ways)

    def _sampling_layout(self, app, ways):
        if self.n == 1:
            # lone app: the unused ways simply stay idle
            return ClusterAssignment(((app,),), (ways,))
        rest = tuple(i for i in range(self.n) if i != app)
        return ClusterAssignment(((app,), rest), (ways, self.k - ways))

    def _enforce(self):
        if self.sampler is not None:
            a = self._sampling_layout(self.sampler, self.states[self.sampler].sweep.ways)
        else:
            a = self.policy_assignment
        if a != self.enforced:
            if not (self.n == 1 and self.sampler is not None):
                try:
                    a.validate(self.n, self.k)
                except FeasibilityError as exc:
                    raise SimulationError(str(exc), self._now()) from exc
            self.enforced = a
            self.assignment_log.append((self.tick_no, a))

    def _max_sweep(self):
        return self.k if self.n == 1 else self.k - 1

    def _start_sampling(self):
        while self.sampler is None and self.queue:
            app = self.queue.popleft()
            s = self.states[app]
            s.mode = Mode.SAMPLING
            s.sweep = Sweep()
            s.win_instr = s.win_cycles = s.win_misses = s.win_stalls = 0.0
            self.sampler = app
            self.sampling_passes += 1
            self._enforce()

    # -- rates --------------------------------------------------------------

    def _rates(self):
        segs = tuple(s.segment for s in self.states)
        key = (self.enforced, segs)
        hit = self._rate_cache.get(key)
        if hit is not None:
            return hit
        n = self.n
        eff = [0.0] * n
        pre = [0.0] * n
        bws = [0.0] * n
        for members, w in zip(self.enforced.clusters, self.enforced.ways):
            tabs = [self.traces[a].segments[segs[a]].tables for a in members]
            shares, slow, bw, _ = cluster_slowdowns(tabs, w, self.peak is not None)
            for j, a in enumerate(members):
                eff[a] = shares[j]
                pre[a] = slow[j]
                if bw is not None:
                    bws[a] = bw[j]
        f = 1.0
        if self.peak is not None:
            f = max(1.0, sum(bws) / self.peak)
        out = []
        for a in range(n):
            tab = self.traces[a].segments[segs[a]].tables
            e = eff[a]
            ipc = tab.ipc[-1] / (pre[a] * f)
            llc = miss_rate(tab, e)
            stall = interpolate(tab.stall_frac, min(float(self.k), max(1.0, e)))
            out.append((ipc, llc, stall, e))
        if len(self._rate_cache) > 4096:
            self._rate_cache.clear()
        self._rate_cache[key] = out
        return out

    # -- monitoring ---------------------------------------------------------

    def _noisy(self, v):
        if self.cfg.noise > 0:
            return max(0.0, v * (1.0 + self.rng.gauss(0.0, self.cfg.noise)))
        return v

    def _sample(self, app, eff):
        s = self.states[app]
        ipc = self._noisy(s.win_instr / s.win_cycles)
        llc = self._noisy(1000.0 * s.win_misses / s.win_cycles)
        stall = min(1.0, self._noisy(s.win_stalls / s.win_cycles))
        s.win_instr = s.win_cycles = s.win_misses = s.win_stalls = 0.0
        if self.cfg.record_samples:
            self.samples.append((self.tick_no, app, s.mode.value, ipc, llc, stall))
        p = self.params
        if s.mode is Mode.WARMUP:
            s.warmup_left -= 1
            if s.warmup_left <= 0:
                s.mode = Mode.QUEUED
                self.queue.append(app)
        elif s.mode is Mode.NORMAL:
            s.history.append((llc, stall))
            s.samples_since_segment += 1
            if detect_class_change(s, eff, p):
                self.signals.append((self.tick_no, app, s.cls.value, s.samples_since_segment))
                s.mode = Mode.QUEUED
                self.queue.append(app)
        elif s.mode is Mode.SAMPLING:
            self.sweep_steps += 1
            out = sampling_sweep_step(s.sweep, ipc, llc, self.k, p, self._max_sweep())
            if isinstance(out, Sweep):
                s.sweep = out
                self._enforce()
            else:
                if out.cls is not s.cls:
                    self.transitions.append((self.tick_no, app, s.cls.value, out.cls.value))
                s.cls = out.cls
                s.slowdown_table = out.slowdown
                s.llcmpkc_table = out.llcmpkc
                s.critical_size = (critical_size(out.slowdown, p.critical_slowdown)
                                   if out.cls is AppClass.SENSITIVE else None)
                s.history.clear()
                s.sweep = None
                s.mode = Mode.NORMAL
                self.sampler = None
                self._repartition()
                self._enforce()
        self._start_sampling()

    # -- main loop ----------------------------------------------------------

    def run(self):
        cfg, params = self.cfg, self.params
        dt = cfg.tick
        clock = self.cache.clock_hz
        lfoc = self.policy == "lfoc"
        if lfoc:
            self._repartition()
        self._enforce()
        period_ticks = max(1, round(params.repartition_period / dt))
        target = cfg.completions_target
        max_ticks = int(math.ceil(cfg.max_time / dt))
        states, traces = self.states, self.traces
        cycles = clock * dt
        while True:
            if lfoc and self.tick_no > 0 and self.tick_no % period_ticks == 0:
                self._repartition()
                self._enforce()
            rates = self._rates()
            t0 = self.tick_no * dt
            sample_due = []
            for a in range(self.n):
                s = states[a]
                ipc, llc, stall, eff = rates[a]
                instr = ipc * cycles
                total = traces[a].total_instructions
                left = total - s.position
                if instr >= left:
                    frac = left / instr
                    end = t0 + frac * dt
                    s.completion_times.append(end - s.run_start)
                    s.completions += 1
                    s.run_start = end
                    s.position = instr - left
                else:
                    s.position += instr
                s.instructions_retired += instr
                s.win_instr += instr
                s.win_cycles += cycles
                s.win_misses += llc * cycles / 1000.0
                s.win_stalls += stall * cycles
                seg = traces[a].segment_at(int(s.position))
                if seg != s.segment:
                    s.segment = seg
                    s.samples_since_segment = 0
                if lfoc:
                    window = params.sampling_window if s.mode is Mode.SAMPLING else params.normal_window
                    if s.win_instr >= window:
                        sample_due.append((a, eff))
            for a, eff in sample_due:
                self._sample(a, eff)
            self.tick_no += 1
            if all(s.completions >= target for s in states):
                break
            if self.tick_no >= max_ticks:
                raise SimulationError("simulation exceeded max_time before all apps completed",
                                      self._now())
        return self.tick_no * dt


def _solo_times(trace: PhaseTrace, cache, config: SimConfig):
    cfg = SimConfig(tick=config.tick, params=config.params,
                    completions_target=config.completions_target,
                    bandwidth_model=config.bandwidth_model, max_time=config.max_time)
    sim = _Simulation([trace], cache, "none", cfg, 0,
                      ClusterAssignment(((0,),), (cache.nr_ways,)))
    sim.run()
    return sim.states[0].completion_times


def run_simulation(workload: WorkloadSpec, policy: str = "lfoc", config: SimConfig | None = None,
                   seed: int = 0, total_instructions: int | None = None) -> SimReport:
    """Simulate ``workload`` under ``policy`` until every app completes enough runs."""
    config = config or SimConfig()
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}; choose from {POLICIES}")
    traces = workload.traces(total_instructions)
    n, k = len(traces), workload.k
    static = None
    try:
        if policy in ("none", "equal_partition"):
            static = baseline_assignments(n, k, policy)
        elif policy == "best_static_oracle":
            from .optimal import best_static
            static = best_static(WorkloadSpec(tuple(t.average_profile() for t in traces),
                                              workload.cache, workload.name)).assignment
    except FeasibilityError as exc:
        raise SimulationError(f"{policy} infeasible: {exc}", 0.0) from exc
    sim = _Simulation(traces, workload.cache, policy, config, seed, static)
    end = sim.run()

    solo_cache: dict = {}
    solo = []
    for t in traces:
        if id(t) not in solo_cache:
            solo_cache[id(t)] = _solo_times(t, workload.cache, config)
        solo.append(solo_cache[id(t)])
    corun = [s.completion_times for s in sim.states]
    means = [_mean(ct, config.mean) for ct in corun]
    solo_means = [_mean(ct, config.mean) for ct in solo]
    slow = [m / s for m, s in zip(means, solo_means)]
    return SimReport(
        policy=policy,
        names=[t.name for t in traces],
        completion_times=corun,
        solo_times=solo,
        mean_times=means,
        solo_mean_times=solo_means,
        slowdowns=slow,
        unfairness=unfairness(slow),
        stp=stp(slow),
        class_transitions=sim.transitions,
        change_signals=sim.signals,
        assignment_log=sim.assignment_log,
        algorithm_invocations=sim.invocations,
        sweep_steps=sim.sweep_steps,
        sampling_passes=sim.sampling_passes,
        end_time=end,
        samples=sim.samples,
        final_classes=[s.cls for s in sim.states],
    )
