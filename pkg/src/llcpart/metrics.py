"""Scoring a cluster assignment: shared-way model, slowdowns, unfairness, STP.

Apps inside one cluster compete for its ways. Each member ends up with an
*effective* way count proportional to its miss rate at that occupancy
(a damped fixed point); a singleton cluster keeps its ways exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, FeasibilityError
from .profiles import AppProfile, CacheConfig, WorkloadSpec, interpolate

DAMPING = 0.5
SHARE_TOL = 1e-3
SHARE_MAX_ITER = 50
BANDWIDTH_MODELS = ("off", "linear")


@dataclass(frozen=True)
class ClusterAssignment:
    """Clusters ``C_1..C_m`` (tuples of app indices) with their way counts."""

    clusters: tuple
    ways: tuple

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(tuple(int(a) for a in c) for c in self.clusters))
        object.__setattr__(self, "ways", tuple(int(w) for w in self.ways))

    @property
    def m(self) -> int:
        return len(self.clusters)

    def violations(self, n: int, k: int) -> list:
        """Return ``[(numeral, reason), ...]`` for every broken restriction."""
        out = []
        m = len(self.clusters)
        if not 1 <= m <= min(n, k):
            out.append(("i", f"cluster count {m} not in [1, {min(n, k)}]"))
        seen: dict = {}
        for ci, members in enumerate(self.clusters):
            if not members:
                out.append(("ii", f"cluster {ci} is empty"))
            for a in members:
                if not 0 <= a < n:
                    out.append(("ii", f"app index {a} outside workload of {n}"))
                elif a in seen:
                    out.append(("iii", f"app {a} in clusters {seen[a]} and {ci}"))
                else:
                    seen[a] = ci
        uncovered = sorted(set(range(n)) - set(seen))
        if uncovered:
            out.append(("ii", f"apps {uncovered} not covered"))
        if len(self.ways) != m:
            out.append(("iv", f"{len(self.ways)} way counts for {m} clusters"))
        for ci, w in enumerate(self.ways):
            if not 1 <= w <= k - m + 1:
                out.append(("iv", f"cluster {ci} has {w} ways, allowed [1, {k - m + 1}]"))
        if sum(self.ways) != k:
            out.append(("iv", f"ways sum to {sum(self.ways)}, expected {k}"))
        return out

    def validate(self, n: int, k: int) -> None:
        bad = self.violations(n, k)
        if bad:
            numerals = sorted({v for v, _ in bad}, key=["i", "ii", "iii", "iv"].index)
            detail = "; ".join(f"({v}) {why}" for v, why in bad)
            raise FeasibilityError(f"infeasible assignment: {detail}", numerals)

    def is_feasible(self, n: int, k: int) -> bool:
        return not self.violations(n, k)

    def canonical(self) -> "ClusterAssignment":
        """Members sorted, clusters ordered by least member, ways carried along."""
        pairs = sorted((tuple(sorted(c)), w) for c, w in zip(self.clusters, self.ways))
        return ClusterAssignment(tuple(c for c, _ in pairs), tuple(w for _, w in pairs))

    def key(self) -> tuple:
        c = self.canonical()
        return (c.clusters, c.ways)

    def cluster_of(self, n: int) -> list:
        owner = [-1] * n
        for ci, members in enumerate(self.clusters):
            for a in members:
                owner[a] = ci
        return owner

    def to_dict(self) -> list:
        return [{"members": list(c), "ways": w} for c, w in zip(self.clusters, self.ways)]

    @classmethod
    def from_dict(cls, items) -> "ClusterAssignment":
        return cls(tuple(tuple(d["members"]) for d in items), tuple(d["ways"] for d in items))

    def __str__(self):
        return " | ".join(f"{{{','.join(map(str, c))}}}:{w}" for c, w in zip(self.clusters, self.ways))


@dataclass(frozen=True)
class EvalResult:
    names: tuple
    effective_ways: tuple
    slowdowns: tuple
    unfairness: float
    stp: float
    bandwidth_factor: float = 1.0
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "per_app": [{"name": n, "effective_ways": e, "slowdown": s}
                        for n, e, s in zip(self.names, self.effective_ways, self.slowdowns)],
            "unfairness": self.unfairness,
            "stp": self.stp,
            "bandwidth_factor": self.bandwidth_factor,
            "converged": self.converged,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def unfairness(slowdowns: Sequence[float]) -> float:
    """Max slowdown over min slowdown."""
    _check(slowdowns)
    return max(slowdowns) / min(slowdowns)


def stp(slowdowns: Sequence[float]) -> float:
    """System throughput: the sum of reciprocal slowdowns."""
    _check(slowdowns)
    total = 0.0
    for s in slowdowns:
        total += 1.0 / s
    return total


def _check(slowdowns):
    if len(slowdowns) == 0:
        raise ValueError("slowdown list is empty")
    for s in slowdowns:
        if not s > 0:
            raise ValueError(f"non-positive slowdown {s}")


# --- sharing model ----------------------------------------------------------

def miss_rate(profile: AppProfile, ways: float) -> float:
    """LLCMPKC at a possibly sub-way occupancy (flat below one way)."""
    if ways <= 1.0:
        return profile.llcmpkc[0]
    return interpolate(profile.llcmpkc, ways)


def shared_slowdown(profile: AppProfile, ways: float) -> float:
    """Slowdown at ``ways`` in ``[0, k]``.

    Below one way the 1-to-2-way slope is extended linearly, so squeezing
    several apps into a single way still costs something.
    """
    s = profile.slowdown
    if ways >= 1.0:
        v = interpolate(s, ways)
    else:
        v = s[0] + (s[0] - s[1]) * (1.0 - ways)
    return v if v > 1.0 else 1.0


def shared_bandwidth(profile: AppProfile, ways: float) -> float:
    if ways <= 1.0:
        return profile.bandwidth[0]
    return interpolate(profile.bandwidth, ways)


def share_ways(members: Sequence[AppProfile], ways: int):
    """Split ``ways`` among ``members``; returns ``(shares, converged)``."""
    j = len(members)
    w = float(ways)
    if j == 1:
        return [w], True
    equal = [w / j] * j
    if all(not any(p.llcmpkc) for p in members):
        return equal, True
    e = equal
    for _ in range(SHARE_MAX_ITER):
        rates = [miss_rate(p, x) for p, x in zip(members, e)]
        total = sum(rates)
        if total <= 0:
            return equal, True
        new = [DAMPING * x + (1.0 - DAMPING) * (w * r / total) for x, r in zip(e, rates)]
        delta = max(abs(a - b) for a, b in zip(new, e))
        e = new
        if delta < SHARE_TOL:
            # finish with one undamped step: exact when miss rates are flat
            rates = [miss_rate(p, x) for p, x in zip(members, e)]
            total = sum(rates)
            if total <= 0:
                return equal, True
            return [w * r / total for r in rates], True
    return equal, False


def cluster_slowdowns(members: Sequence[AppProfile], ways: int, with_bandwidth: bool = False):
    """Shares, pre-contention slowdowns and bandwidths for one cluster."""
    shares, ok = share_ways(members, ways)
    slow = [shared_slowdown(p, e) for p, e in zip(members, shares)]
    bw = [shared_bandwidth(p, e) for p, e in zip(members, shares)] if with_bandwidth else None
    return shares, slow, bw, ok


def score(pre_slowdowns: Sequence[float], bandwidths=None, peak: float | None = None):
    """Combine per-app slowdowns into ``(final, factor, unfairness, stp)``.

    The arithmetic order here is mirrored exactly by the search kernels so
    both produce bit-identical scores.
    """
    f = 1.0
    if peak is not None:
        total = 0.0
        for b in bandwidths:
            total += b
        f = total / peak
        if f < 1.0:
            f = 1.0
    final = [s * f for s in pre_slowdowns]
    hi = max(final)
    lo = min(final)
    acc = 0.0
    for s in final:
        acc += 1.0 / s
    return final, f, hi / lo, acc


def _bandwidth_peak(profiles, cache: CacheConfig, bandwidth_model: str):
    if bandwidth_model not in BANDWIDTH_MODELS:
        raise ConfigError(f"unknown bandwidth model {bandwidth_model!r}")
    if bandwidth_model == "off":
        return None
    if cache.peak_bandwidth is None:
        raise ConfigError("bandwidth_model=linear needs peak_bandwidth in the cache config")
    missing = [p.name for p in profiles if p.bandwidth is None]
    if missing:
        raise ConfigError(f"bandwidth_model=linear needs bandwidth tables; missing for {missing}")
    return cache.peak_bandwidth


def _shares(assignment, profiles, with_bw):
    n = len(profiles)
    eff = [0.0] * n
    pre = [0.0] * n
    bws = [0.0] * n
    converged = True
    for members, w in zip(assignment.clusters, assignment.ways):
        shares, slow, bw, ok = cluster_slowdowns([profiles[a] for a in members], w, with_bw)
        converged &= ok
        for idx, a in enumerate(members):
            eff[a] = shares[idx]
            pre[a] = slow[idx]
            if with_bw:
                bws[a] = bw[idx]
    return eff, pre, bws, converged


def effective_ways_for(assignment: ClusterAssignment, profiles: Sequence[AppProfile], k: int) -> list:
    assignment.validate(len(profiles), k)
    return _shares(assignment, profiles, False)[0]


def effective_ways(assignment: ClusterAssignment, workload: WorkloadSpec) -> list:
    """Per-app effective way counts under the miss-proportional sharing model."""
    return effective_ways_for(assignment, workload.profiles, workload.k)


def evaluate_profiles(assignment: ClusterAssignment, profiles: Sequence[AppProfile],
                      cache: CacheConfig, bandwidth_model: str = "off") -> EvalResult:
    assignment.validate(len(profiles), cache.nr_ways)
    peak = _bandwidth_peak(profiles, cache, bandwidth_model)
    eff, pre, bws, converged = _shares(assignment, profiles, peak is not None)
    final, f, unf, total = score(pre, bws, peak)
    return EvalResult(tuple(p.name for p in profiles), tuple(eff), tuple(final), unf, total, f, converged)


def evaluate(assignment: ClusterAssignment, workload: WorkloadSpec,
             bandwidth_model: str = "off") -> EvalResult:
    """Slowdowns, unfairness and STP of ``assignment`` on ``workload``."""
    return evaluate_profiles(assignment, workload.profiles, workload.cache, bandwidth_model)
