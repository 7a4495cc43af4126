"""Exact optimal clustering / partitioning search and search-space counting.

Two strategies share one total order over candidates:

* ``exhaustive`` scores every feasible assignment with
  :func:`llcpart.metrics.evaluate_profiles`; it is the reference oracle.
* ``branch_and_bound`` walks set partitions of the apps depth-first and, for
  each complete clustering, searches way vectors with a compiled kernel
  (:mod:`llcpart.kernels`). Bounds come from exact per-cluster slowdown tables.

Ties after the objective's two keys go to the lexicographically smallest
canonical assignment, which keeps results independent of worker count.
"""
from __future__ import annotations

import enum
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import BudgetError, ConfigError, FeasibilityError
from .metrics import (ClusterAssignment, EvalResult, _bandwidth_peak, cluster_slowdowns,
                      evaluate_profiles, score, shared_slowdown)
from .profiles import AppProfile, CacheConfig, WorkloadSpec

DEFAULT_BUDGET = 10 ** 8
# pruning margin; leaves are compared exactly, bounds only need to be safe
BOUND_SLACK = 1e-9


class Objective(str, enum.Enum):
    FAIRNESS = "fairness"
    THROUGHPUT = "throughput"


class SearchMode(str, enum.Enum):
    CLUSTERING = "clustering"
    PARTITIONING = "partitioning"


STRATEGIES = ("exhaustive", "branch_and_bound")


# --- counting ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _stirling_row(n: int) -> tuple:
    row = [1]  # S(0, 0)
    for i in range(1, n + 1):
        new = [0] * (i + 1)
        for m in range(1, i + 1):
            new[m] = m * (row[m] if m < len(row) else 0) + row[m - 1]
        row = new
    return tuple(row)


def stirling2(n: int, m: int) -> int:
    """Stirling number of the second kind (set partitions of n into m blocks)."""
    if n < 0 or m < 0:
        raise ValueError("negative argument")
    if m > n:
        return 0
    return _stirling_row(n)[m]


def count_partitionings(n: int, k: int) -> int:
    """Ways to give each of ``n`` apps at least one of ``k`` ways: C(k-1, n-1)."""
    if not 1 <= n <= k:
        raise FeasibilityError(f"partitioning needs 1 <= n <= k (n={n}, k={k})", ["i"])
    return comb(k - 1, n - 1)


def count_clusterings(n: int, k: int) -> int:
    """Feasible cluster sets times way vectors: sum over m of S(n,m)·C(k-1,m-1)."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    return sum(stirling2(n, m) * comb(k - 1, m - 1) for m in range(1, min(n, k) + 1))


def count_space(n: int, k: int, mode: SearchMode | str = SearchMode.CLUSTERING) -> int:
    mode = SearchMode(mode)
    return count_partitionings(n, k) if mode is SearchMode.PARTITIONING else count_clusterings(n, k)


# --- enumeration ------------------------------------------------------------

def set_partitions(n: int, max_blocks: int | None = None) -> Iterator[list]:
    """Set partitions of ``range(n)`` as block lists ordered by least member."""
    limit = n if max_blocks is None else max_blocks
    blocks: list = []

    def rec(i):
        if i == n:
            yield [tuple(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1)
            b.pop()
        if len(blocks) < limit:
            blocks.append([i])
            yield from rec(i + 1)
            blocks.pop()

    yield from rec(0)


def compositions(k: int, m: int) -> Iterator[tuple]:
    """Compositions of ``k`` into ``m`` positive parts, lexicographic order."""
    if m == 1:
        if k >= 1:
            yield (k,)
        return
    for first in range(1, k - m + 2):
        for rest in compositions(k - first, m - 1):
            yield (first,) + rest


def iter_clusterings(n: int, k: int) -> Iterator[ClusterAssignment]:
    for blocks in set_partitions(n, min(n, k)):
        for ways in compositions(k, len(blocks)):
            yield ClusterAssignment(tuple(blocks), ways)


def iter_partitionings(n: int, k: int) -> Iterator[ClusterAssignment]:
    count_partitionings(n, k)
    singles = tuple((i,) for i in range(n))
    for ways in compositions(k, n):
        yield ClusterAssignment(singles, ways)


def iter_space(n: int, k: int, mode: SearchMode | str) -> Iterator[ClusterAssignment]:
    mode = SearchMode(mode)
    return iter_partitionings(n, k) if mode is SearchMode.PARTITIONING else iter_clusterings(n, k)


# --- ordering ---------------------------------------------------------------

def objective_key(objective: Objective, unfairness: float, stp: float) -> tuple:
    if Objective(objective) is Objective.FAIRNESS:
        return (unfairness, -stp)
    return (-stp, unfairness)


def candidate_key(objective: Objective, result: EvalResult, assignment: ClusterAssignment) -> tuple:
    return objective_key(objective, result.unfairness, result.stp) + (assignment.key(),)


@dataclass
class SolveResult:
    assignment: ClusterAssignment
    result: EvalResult
    objective: Objective
    mode: SearchMode
    strategy: str
    nodes_explored: int = 0
    nodes_pruned: int = 0
    wall_time_ms: float = 0.0
    backend: str = "python"

    def __iter__(self):
        yield self.assignment
        yield self.result

    def to_dict(self) -> dict:
        return {
            "assignment": self.assignment.to_dict(),
            "unfairness": self.result.unfairness,
            "stp": self.result.stp,
            "nodes_explored": self.nodes_explored,
            "nodes_pruned": self.nodes_pruned,
            "wall_time_ms": self.wall_time_ms,
            "objective": self.objective.value,
            "mode": self.mode.value,
            "strategy": self.strategy,
            "backend": self.backend,
        }


# --- branch and bound -------------------------------------------------------

class _Searcher:
    def __init__(self, profiles: Sequence[AppProfile], k: int, objective: Objective,
                 peak: float | None, search=None):
        self.profiles = list(profiles)
        self.n = len(profiles)
        self.k = k
        self.objective = Objective(objective)
        self.peak = peak
        self.search = search or kernels.search_compositions
        self._cache: dict = {}
        self.explored = 0
        self.pruned = 0
        # profile-level bounds over any occupancy in [0, W]; piecewise linear,
        # so extremes sit on the knots 0, 1, ..., W
        self.app_lo = []
        self.app_hi = []
        for p in self.profiles:
            knots = [shared_slowdown(p, 0.0)] + [shared_slowdown(p, float(w)) for w in range(1, k + 1)]
            lo, cur = [], knots[0]
            for v in knots:
                cur = min(cur, v)
                lo.append(cur)
            self.app_lo.append(lo)
            self.app_hi.append(max(knots))
        self.kcode = kernels.FAIRNESS if self.objective is Objective.FAIRNESS else kernels.THROUGHPUT
        self.best = None  # (key, ways, blocks, unf, stp)

    def cluster(self, members: tuple, w: int):
        hit = self._cache.get((members, w))
        if hit is None:
            _, slow, bw, _ = cluster_slowdowns([self.profiles[a] for a in members], w,
                                               self.peak is not None)
            hit = (slow, bw)
            self._cache[(members, w)] = hit
        return hit

    def offer(self, blocks, ways, unf, stp):
        key = objective_key(self.objective, unf, stp) + ((tuple(blocks), tuple(ways)),)
        if self.best is None or key < self.best[0]:
            self.best = (key, tuple(ways), tuple(blocks), unf, stp)

    def seed(self, assignment: ClusterAssignment):
        a = assignment.canonical()
        pre = [0.0] * self.n
        bws = [0.0] * self.n
        for members, w in zip(a.clusters, a.ways):
            slow, bw = self.cluster(members, w)
            for j, app in enumerate(members):
                pre[app] = slow[j]
                if bw is not None:
                    bws[app] = bw[j]
        _, _, unf, total = score(pre, bws, self.peak)
        self.offer(a.clusters, a.ways, unf, total)

    def _outer_prune(self, m_now: int) -> bool:
        if self.best is None:
            return False
        wmax = self.k - max(m_now, 1) + 1
        if self.objective is Objective.FAIRNESS:
            lb = max(lo[wmax] for lo in self.app_lo)
            ub = min(self.app_hi)
            return lb / ub > self.best[3] * (1.0 + BOUND_SLACK)
        ub = sum(1.0 / lo[wmax] for lo in self.app_lo)
        return ub < self.best[4] * (1.0 - BOUND_SLACK)

    def solve_blocks(self, blocks: Sequence[tuple]):
        m, k, n = len(blocks), self.k, self.n
        top = k - m + 1
        slow = np.zeros((m, k + 1, n))
        bw = np.zeros((m, k + 1, n))
        owner = np.zeros(n, dtype=np.intc)
        for c, members in enumerate(blocks):
            owner[list(members)] = c
            for w in range(1, top + 1):
                s, b = self.cluster(members, w)
                slow[c, w, list(members)] = s
                if b is not None:
                    bw[c, w, list(members)] = b
        lo = slow.copy()
        hi = slow.copy()
        np.minimum.accumulate(lo[:, 1:top + 1, :], axis=1, out=lo[:, 1:top + 1, :])
        np.maximum.accumulate(hi[:, 1:top + 1, :], axis=1, out=hi[:, 1:top + 1, :])
        has_inc = self.best is not None
        inc_unf = self.best[3] if has_inc else 0.0
        inc_stp = self.best[4] if has_inc else 0.0
        found, ways, unf, stp_, explored, pruned = self.search(
            slow, bw, lo, hi, owner, m, k, self.kcode,
            self.peak if self.peak is not None else 0.0,
            inc_unf, inc_stp, has_inc, BOUND_SLACK)
        self.explored += explored
        self.pruned += pruned
        if found:
            self.offer(blocks, ways, unf, stp_)

    def run(self, mode: SearchMode, prefix: Sequence[int] = ()):
        """Search every clustering whose first apps follow ``prefix`` (a growth string)."""
        n, k = self.n, self.k
        if mode is SearchMode.PARTITIONING:
            self.solve_blocks([(i,) for i in range(n)])
            return
        limit = min(n, k)
        blocks: list = []
        for i, b in enumerate(prefix):
            if b == len(blocks):
                blocks.append([i])
            else:
                blocks[b].append(i)

        def rec(i):
            self.explored += 1
            if self._outer_prune(len(blocks)):
                self.pruned += 1
                return
            if i == n:
                self.solve_blocks([tuple(b) for b in blocks])
                return
            for b in blocks:
                b.append(i)
                rec(i + 1)
                b.pop()
            if len(blocks) < limit:
                blocks.append([i])
                rec(i + 1)
                blocks.pop()

        rec(len(prefix))


def _growth_prefixes(depth: int, limit: int) -> list:
    out = [()]
    for _ in range(depth):
        nxt = []
        for p in out:
            top = (max(p) + 1) if p else 0
            for b in range(min(top + 1, limit)):
                nxt.append(p + (b,))
        out = nxt
    return out


def _run_prefix(args):
    profiles, k, objective, peak, prefix, seed_assignment = args
    s = _Searcher(profiles, k, objective, peak)
    s.seed(seed_assignment)
    s.run(SearchMode.CLUSTERING, prefix)
    return s.best, s.explored, s.pruned


def _seed_for(n: int, k: int, mode: SearchMode) -> ClusterAssignment:
    if mode is SearchMode.PARTITIONING:
        base, extra = divmod(k, n)
        return ClusterAssignment(tuple((i,) for i in range(n)),
                                 tuple(base + (1 if i < extra else 0) for i in range(n)))
    return ClusterAssignment((tuple(range(n)),), (k,))


def _branch_and_bound(profiles, k, objective, mode, peak, workers):
    n = len(profiles)
    seed = _seed_for(n, k, mode)
    if workers <= 1 or mode is SearchMode.PARTITIONING or n < 4:
        s = _Searcher(profiles, k, objective, peak)
        s.seed(seed)
        s.run(mode)
        return s.best, s.explored, s.pruned
    depth = 1
    while depth < n - 1 and len(_growth_prefixes(depth, min(n, k))) < 4 * workers:
        depth += 1
    prefixes = _growth_prefixes(depth, min(n, k))
    jobs = [(list(profiles), k, objective, peak, p, seed) for p in prefixes]
    best, explored, pruned = None, 0, 0
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # ordered reduction: results are merged in prefix order
        for cand, e, p in pool.map(_run_prefix, jobs):
            explored += e
            pruned += p
            if cand is not None and (best is None or cand[0] < best[0]):
                best = cand
    return best, explored, pruned


def solve_optimal_profiles(profiles: Sequence[AppProfile], cache: CacheConfig,
                           objective: Objective | str = Objective.FAIRNESS,
                           mode: SearchMode | str = SearchMode.CLUSTERING,
                           strategy: str = "branch_and_bound", budget: int = DEFAULT_BUDGET,
                           workers: int = 1, bandwidth_model: str = "off") -> SolveResult:
    objective, mode = Objective(objective), SearchMode(mode)
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    n, k = len(profiles), cache.nr_ways
    if n < 1:
        raise FeasibilityError("empty workload", ["i"])
    if mode is SearchMode.PARTITIONING and n > k:
        raise FeasibilityError(f"partitioning the LLC is unfeasible with n={n} > k={k}", ["i"])
    peak = _bandwidth_peak(profiles, cache, bandwidth_model)
    t0 = time.perf_counter()
    if strategy == "exhaustive":
        size = count_space(n, k, mode)
        if size > budget:
            raise BudgetError(f"{size} candidates exceed the exploration budget of {budget}")
        best = None
        for cand in iter_space(n, k, mode):
            res = evaluate_profiles(cand, profiles, cache, bandwidth_model)
            key = candidate_key(objective, res, cand)
            if best is None or key < best[0]:
                best = (key, cand, res)
        _, assignment, result = best
        explored, pruned, backend = size, 0, "python"
    else:
        cand, explored, pruned = _branch_and_bound(profiles, k, objective, mode, peak, workers)
        _, ways, blocks, _, _ = cand
        assignment = ClusterAssignment(blocks, ways)
        result = evaluate_profiles(assignment, profiles, cache, bandwidth_model)
        backend = kernels.BACKEND
    wall = (time.perf_counter() - t0) * 1e3
    return SolveResult(assignment, result, objective, mode, strategy, explored, pruned, wall, backend)


def solve_optimal(workload: WorkloadSpec, objective: Objective | str = Objective.FAIRNESS,
                  mode: SearchMode | str = SearchMode.CLUSTERING,
                  strategy: str = "branch_and_bound", budget: int = DEFAULT_BUDGET,
                  workers: int = 1, bandwidth_model: str = "off") -> SolveResult:
    """Optimal assignment under ``objective``; unpacks as ``(assignment, result)``."""
    return solve_optimal_profiles(workload.profiles, workload.cache, objective, mode, strategy,
                                  budget, workers, bandwidth_model)


def best_static(workload: WorkloadSpec, **kw) -> SolveResult:
    """Fairness-optimal clustering, held fixed for a whole run."""
    return solve_optimal(workload, Objective.FAIRNESS, SearchMode.CLUSTERING, "branch_and_bound", **kw)
