"""LFOC's static decision logic: classification, lookahead, cluster building."""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ConfigError, FeasibilityError
from .metrics import ClusterAssignment
from .profiles import AppProfile


class AppClass(str, enum.Enum):
    STREAMING = "streaming"
    SENSITIVE = "sensitive"
    LIGHT_SHARING = "light_sharing"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


GAP_MODES = ("literal", "capacity")
SENSITIVE_RULES = ("allocation", "count")


@dataclass(frozen=True)
class LfocParams:
    """Every LFOC tunable; defaults are the values used on the reference platform."""

    max_streaming_way: int = 5
    gaps_per_streaming: int = 3
    streaming_slowdown_lo: float = 1.03
    streaming_slowdown_hi: float = 1.06
    streaming_llcmpkc: float = 10.0
    sensitive_slowdown: float = 1.05
    sensitive_min_ways: int = 2
    high_threshold: float = 10.0
    low_threshold_ratio: float = 0.30
    stall_threshold: float = 0.25
    critical_slowdown: float = 1.05
    history_len: int = 5
    warmup_periods: int = 3
    normal_window: float = 100e6
    sampling_window: float = 10e6
    repartition_period: float = 0.5
    # consecutive sweep steps with IPC gain below streaming_slowdown_lo before
    # a streaming-looking app stops sampling
    stream_flat_steps: int = 2
    early_stop: bool = True
    gap_mode: str = "literal"
    sensitive_rule: str = "allocation"

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or isinstance(v, str):
                continue
            if not v > 0:
                raise ConfigError(f"{f.name} must be positive, got {v}")
        if self.gap_mode not in GAP_MODES:
            raise ConfigError(f"gap_mode must be one of {GAP_MODES}")
        if self.sensitive_rule not in SENSITIVE_RULES:
            raise ConfigError(f"sensitive_rule must be one of {SENSITIVE_RULES}")

    @property
    def low_threshold(self) -> float:
        return self.low_threshold_ratio * self.high_threshold

    def to_config(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str) -> "LfocParams":
        """Parse ``key=value`` lines; unspecified keys keep their defaults."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = (s.strip() for s in line.partition("="))
            if not sep or key not in types:
                raise ConfigError(f"line {lineno}: unknown or malformed entry {line!r}")
            kw[key] = _coerce(types[key], val, lineno)
        return cls(**kw)


def _coerce(typ, val, lineno):
    try:
        if typ in ("bool", bool):
            if val.lower() in ("1", "true", "yes", "on"):
                return True
            if val.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ in ("int", int):
            f = float(val)
            if f != int(f):
                raise ValueError
            return int(f)
        if typ in ("float", float):
            return float(val)
        return val
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {val!r}") from None


DEFAULT_PARAMS = LfocParams()


def classify_tables(slowdowns: Sequence[float], llcmpkc: Sequence[float],
                    params: LfocParams = DEFAULT_PARAMS) -> AppClass:
    """Classify from per-way slowdown and LLCMPKC tables (index 0 = 1 way)."""
    if len(slowdowns) != len(llcmpkc) or not slowdowns:
        raise ConfigError("incomplete tables: slowdown and llcmpkc must cover the same ways")
    streaming = (
        any(s <= params.streaming_slowdown_lo and m >= params.streaming_llcmpkc
            for s, m in zip(slowdowns, llcmpkc))
        and all(s < params.streaming_slowdown_hi for s in slowdowns)
    )
    if streaming:
        return AppClass.STREAMING
    hits = [w for w, s in enumerate(slowdowns, 1) if s >= params.sensitive_slowdown]
    if params.sensitive_rule == "allocation":
        sensitive = any(w >= params.sensitive_min_ways for w in hits)
    else:
        sensitive = len(hits) >= params.sensitive_min_ways
    return AppClass.SENSITIVE if sensitive else AppClass.LIGHT_SHARING


def classify(profile: AppProfile, params: LfocParams = DEFAULT_PARAMS) -> AppClass:
    return classify_tables(profile.slowdown, profile.llcmpkc, params)


def critical_size(slowdowns: Sequence[float], threshold: float = 1.05) -> int:
    """Smallest way count whose slowdown is below ``threshold``."""
    for w, s in enumerate(slowdowns, 1):
        if s < threshold:
            return w
    return len(slowdowns)


def lookahead(slowdown_tables: Sequence[Sequence[float]], budget: int) -> list:
    """Greedy marginal-utility way allocation over slowdown curves.

    Every app starts with one way. Each round grants the block of ways with
    the best slowdown reduction per way; ties go to the lowest app index and
    then the smaller block. Once no block reduces any slowdown, leftover ways
    go one at a time to the app with the highest current slowdown.
    """
    n = len(slowdown_tables)
    if n == 0:
        raise FeasibilityError("lookahead needs at least one app")
    if budget < n:
        raise FeasibilityError(f"budget {budget} < {n} apps: every app needs one way", ["iv"])
    alloc = [1] * n
    left = budget - n

    def at(t, w):
        return t[min(w, len(t)) - 1]

    while left > 0:
        best_u, best_app, best_d = 0.0, -1, 0
        for i, t in enumerate(slowdown_tables):
            cur = at(t, alloc[i])
            for d in range(1, left + 1):
                u = (cur - at(t, alloc[i] + d)) / d
                if u > best_u:
                    best_u, best_app, best_d = u, i, d
        if best_app < 0:
            worst = max(range(n), key=lambda i: (at(slowdown_tables[i], alloc[i]), -i))
            alloc[worst] += 1
            left -= 1
        else:
            alloc[best_app] += best_d
            left -= best_d
    return alloc


def streaming_ways(n_streaming: int, params: LfocParams = DEFAULT_PARAMS) -> int:
    if n_streaming == 0:
        return 0
    return max(1, min(2, -(-n_streaming // params.max_streaming_way)))


def lfoc_partition(st: Sequence[int], cs: Sequence[int], ls: Sequence[int], nr_ways: int,
                   slowdown_tables: Mapping[int, Sequence[float]],
                   params: LfocParams = DEFAULT_PARAMS) -> ClusterAssignment:
    """Build LFOC's cluster assignment from the three class sets.

    ``slowdown_tables`` maps each sensitive app index to its per-way slowdown
    curve. Clusters come out in creation order: streaming clusters, then one
    cluster per sensitive app.
    """
    st, cs, ls = list(st), list(cs), list(ls)
    everyone = st + cs + ls
    if len(set(everyone)) != len(everyone):
        raise FeasibilityError("class sets overlap", ["iii"])
    if not everyone:
        raise FeasibilityError("no applications to place", ["i"])
    if not cs:
        return ClusterAssignment((tuple(sorted(st + ls)),), (nr_ways,))

    wfs = streaming_ways(len(st), params)
    if wfs and nr_ways - len(cs) < wfs:
        # tight cache: keep one streaming way if that still fits
        wfs = 1
    if nr_ways < len(cs) + wfs:
        raise FeasibilityError(
            f"{nr_ways} ways cannot host {len(cs)} sensitive clusters plus {wfs} streaming way(s)", ["i", "iv"])

    clusters, ways = [], []
    r = math.ceil(len(st) / wfs) if wfs else 0
    pending = list(st)
    n_stream_apps = []
    for _ in range(wfs):
        grab, pending = pending[:r], pending[r:]
        clusters.append(grab)
        ways.append(1)
        n_stream_apps.append(len(grab))

    alloc = lookahead([slowdown_tables[a] for a in cs], nr_ways - wfs)
    for a, w in zip(cs, alloc):
        clusters.append([a])
        ways.append(w)

    pending = list(ls)
    # the reference loop never advances idx; advancing it guarantees termination
    for idx in range(wfs):
        if not pending:
            break
        target = clusters[idx]
        if params.gap_mode == "literal":
            gaps = r - len(target) * params.gaps_per_streaming
        else:
            gaps = params.gaps_per_streaming * n_stream_apps[idx] - (len(target) - n_stream_apps[idx])
        if gaps > 0:
            target.extend(pending[:gaps])
            pending = pending[gaps:]

    for j, a in enumerate(pending):
        clusters[wfs + j % len(cs)].append(a)

    return ClusterAssignment(tuple(tuple(c) for c in clusters), tuple(ways))


def lfoc_from_profiles(profiles: Sequence[AppProfile], nr_ways: int,
                       params: LfocParams = DEFAULT_PARAMS):
    """Classify every profile offline and run the clustering algorithm.

    Returns ``(assignment, classes)``.
    """
    classes = [classify(p, params) for p in profiles]
    st = [i for i, c in enumerate(classes) if c is AppClass.STREAMING]
    cs = [i for i, c in enumerate(classes) if c is AppClass.SENSITIVE]
    ls = [i for i, c in enumerate(classes) if c is AppClass.LIGHT_SHARING]
    tables = {i: profiles[i].slowdown for i in cs}
    return lfoc_partition(st, cs, ls, nr_ways, tables, params), classes


def baseline_assignments(n: int, k: int, kind: str) -> ClusterAssignment:
    """``none``: one shared cluster; ``equal_partition``: balanced singletons."""
    if kind == "none":
        return ClusterAssignment((tuple(range(n)),), (k,))
    if kind == "equal_partition":
        if n > k:
            raise FeasibilityError(f"equal partitioning needs n <= k (n={n}, k={k})", ["i"])
        base, extra = divmod(k, n)
        return ClusterAssignment(tuple((i,) for i in range(n)),
                                 tuple(base + (1 if i < extra else 0) for i in range(n)))
    raise ConfigError(f"unknown baseline {kind!r}")
