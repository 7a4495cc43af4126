"""Per-application, per-way performance profiles and phase traces.

A profile stores, for every way count ``w`` in ``1..k``, the IPC, LLC misses
per kilocycle (LLCMPKC), the fraction of stalled cycles and optionally the
memory bandwidth observed when the application runs alone with ``w`` ways.
Slowdowns are derived from IPC relative to the full-cache IPC.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DomainError, ProfileError

METRICS = ("ipc", "llcmpkc", "stall_frac", "bandwidth")
PROFILE_COLUMNS = ("app", "ways", "ipc", "llcmpkc", "stall_frac")
TRACE_COLUMNS = ("app", "segment", "duration_instr", "ways", "ipc", "llcmpkc", "stall_frac")


@dataclass(frozen=True)
class CacheConfig:
    """Shared LLC geometry. Defaults mirror an 11-way 27.5 MB L3 at 2 GHz."""

    nr_ways: int = 11
    way_size: float = 2.5
    clock_hz: float = 2e9
    peak_bandwidth: float | None = None

    def __post_init__(self):
        if int(self.nr_ways) != self.nr_ways or self.nr_ways < 2:
            raise ProfileError(f"nr_ways must be an integer >= 2, got {self.nr_ways}")
        if not self.way_size > 0:
            raise ProfileError(f"way_size must be positive, got {self.way_size}")
        if not self.clock_hz > 0:
            raise ProfileError(f"clock_hz must be positive, got {self.clock_hz}")
        if self.peak_bandwidth is not None and not self.peak_bandwidth > 0:
            raise ProfileError(f"peak_bandwidth must be positive, got {self.peak_bandwidth}")


def _as_table(values, what, name):
    try:
        table = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ProfileError(f"{name}: non-numeric {what} table") from exc
    if any(not math.isfinite(v) for v in table):
        raise ProfileError(f"{name}: non-finite value in {what} table")
    return table


@dataclass(frozen=True)
class AppProfile:
    """Per-way tables for one application; index ``w - 1`` holds way count ``w``."""

    name: str
    ipc: tuple
    llcmpkc: tuple
    stall_frac: tuple
    bandwidth: tuple | None = None
    slowdown: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        name = self.name
        ipc = _as_table(self.ipc, "ipc", name)
        k = len(ipc)
        if k < 1:
            raise ProfileError(f"{name}: empty ipc table")
        llc = _as_table(self.llcmpkc, "llcmpkc", name)
        stall = _as_table(self.stall_frac, "stall_frac", name)
        tables = {"llcmpkc": llc, "stall_frac": stall}
        bw = None
        if self.bandwidth is not None:
            bw = _as_table(self.bandwidth, "bandwidth", name)
            tables["bandwidth"] = bw
        for what, table in tables.items():
            if len(table) != k:
                raise ProfileError(f"{name}: {what} has {len(table)} entries, expected {k}")
        for w, v in enumerate(ipc, 1):
            if v <= 0:
                raise ProfileError(f"{name}: non-positive ipc {v} at way {w}")
        for w, v in enumerate(llc, 1):
            if v < 0:
                raise ProfileError(f"{name}: negative llcmpkc {v} at way {w}")
        for w, v in enumerate(stall, 1):
            if not 0 <= v <= 1:
                raise ProfileError(f"{name}: stall_frac {v} at way {w} outside [0, 1]")
        if bw is not None:
            for w, v in enumerate(bw, 1):
                if v < 0:
                    raise ProfileError(f"{name}: negative bandwidth {v} at way {w}")
        object.__setattr__(self, "ipc", ipc)
        object.__setattr__(self, "llcmpkc", llc)
        object.__setattr__(self, "stall_frac", stall)
        object.__setattr__(self, "bandwidth", bw)
        # noise can push ipc(w) above ipc(k); clamp so min slowdown stays 1
        full = ipc[-1]
        object.__setattr__(self, "slowdown", tuple(max(1.0, full / v) for v in ipc))

    @property
    def nr_ways(self) -> int:
        return len(self.ipc)

    def table(self, metric: str) -> tuple:
        if metric == "slowdown":
            return self.slowdown
        if metric not in METRICS:
            raise ProfileError(f"unknown metric {metric!r}")
        values = getattr(self, metric)
        if values is None:
            raise ProfileError(f"metric unavailable: {metric} for {self.name}")
        return values

    def renamed(self, name: str) -> "AppProfile":
        return AppProfile(name, self.ipc, self.llcmpkc, self.stall_frac, self.bandwidth)


def interpolate(table: Sequence[float], ways: float) -> float:
    """Piecewise-linear lookup of a per-way table at a real way count in [1, k]."""
    k = len(table)
    if not 1 <= ways <= k:
        raise DomainError(f"ways={ways} outside [1, {k}]")
    lo = int(ways)
    if lo == ways:
        return table[lo - 1]
    frac = ways - lo
    a = table[lo - 1]
    return a + (table[lo] - a) * frac


def slowdown_at(profile: AppProfile, ways: float) -> float:
    """Slowdown of ``profile`` when it owns ``ways`` ways (fractional allowed)."""
    return max(1.0, interpolate(profile.slowdown, ways))


def table_at(profile: AppProfile, metric: str, ways: float) -> float:
    return interpolate(profile.table(metric), ways)


@dataclass(frozen=True)
class Segment:
    """A program phase lasting ``duration`` instructions."""

    duration: int
    tables: AppProfile

    def __post_init__(self):
        if int(self.duration) != self.duration or self.duration <= 0:
            raise ProfileError(f"segment duration must be a positive integer, got {self.duration}")


@dataclass(frozen=True)
class PhaseTrace:
    """Ordered phases of one application.

    A run lasts ``total_instructions``; the segment list wraps cyclically when
    a run is longer than the trace, and every new run starts again at segment 0.
    """

    name: str
    segments: tuple
    total_instructions: int

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ProfileError(f"{self.name}: trace has no segments")
        k = segs[0].tables.nr_ways
        if any(s.tables.nr_ways != k for s in segs):
            raise ProfileError(f"{self.name}: segments disagree on way count")
        if int(self.total_instructions) != self.total_instructions or self.total_instructions <= 0:
            raise ProfileError(f"{self.name}: total_instructions must be a positive integer")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "total_instructions", int(self.total_instructions))

    @classmethod
    def stationary(cls, profile: AppProfile, total_instructions: int) -> "PhaseTrace":
        return cls(profile.name, (Segment(int(total_instructions), profile),), total_instructions)

    @property
    def nr_ways(self) -> int:
        return self.segments[0].tables.nr_ways

    @property
    def cycle_length(self) -> int:
        return sum(s.duration for s in self.segments)

    def segment_at(self, position: int) -> int:
        """Index of the segment executing ``position`` instructions into a run."""
        pos = position % self.cycle_length
        for i, seg in enumerate(self.segments):
            if pos < seg.duration:
                return i
            pos -= seg.duration
        return len(self.segments) - 1

    def segment_end(self, position: int) -> int:
        """Run position at which the segment containing ``position`` ends."""
        cyc = self.cycle_length
        base = position - position % cyc
        acc = 0
        for seg in self.segments:
            acc += seg.duration
            if position < base + acc:
                return base + acc
        return base + cyc

    def average_profile(self) -> AppProfile:
        """Whole-run average tables (time-weighted rates) for one run.

        IPC is averaged as instructions over cycles; per-cycle rates are
        cycle-weighted. Used by offline policies on phased traces.
        """
        segs = self.segments
        if len(segs) == 1:
            return segs[0].tables
        k = self.nr_ways
        weights = []
        left = self.total_instructions
        i = 0
        while left > 0:
            seg = segs[i % len(segs)]
            take = min(seg.duration, left)
            weights.append((take, seg.tables))
            left -= take
            i += 1
        has_bw = all(t.bandwidth is not None for _, t in weights)
        ipc, llc, stall, bw = [], [], [], []
        for w in range(k):
            cycles = [instr / t.ipc[w] for instr, t in weights]
            total_cycles = sum(cycles)
            ipc.append(sum(instr for instr, _ in weights) / total_cycles)
            llc.append(sum(c * t.llcmpkc[w] for c, (_, t) in zip(cycles, weights)) / total_cycles)
            stall.append(sum(c * t.stall_frac[w] for c, (_, t) in zip(cycles, weights)) / total_cycles)
            if has_bw:
                bw.append(sum(c * t.bandwidth[w] for c, (_, t) in zip(cycles, weights)) / total_cycles)
        return AppProfile(self.name, ipc, llc, stall, bw if has_bw else None)


@dataclass(frozen=True)
class WorkloadSpec:
    """A multiprogram workload: app instances (duplicates allowed) plus the cache."""

    apps: tuple
    cache: CacheConfig = CacheConfig()
    name: str = "workload"

    def __post_init__(self):
        apps = tuple(self.apps)
        if not apps:
            raise ProfileError("workload has no applications")
        for app in apps:
            if app.nr_ways != self.cache.nr_ways:
                raise ProfileError(
                    f"{app.name}: tables cover {app.nr_ways} ways, cache has {self.cache.nr_ways}")
        object.__setattr__(self, "apps", apps)

    @property
    def n(self) -> int:
        return len(self.apps)

    @property
    def k(self) -> int:
        return self.cache.nr_ways

    @property
    def profiles(self) -> list:
        """Static per-way tables for every app (trace averages for phased apps)."""
        return [a.average_profile() if isinstance(a, PhaseTrace) else a for a in self.apps]

    @property
    def names(self) -> list:
        return [a.name for a in self.apps]

    def traces(self, total_instructions: int | None = None) -> list:
        out = []
        for a in self.apps:
            if isinstance(a, PhaseTrace):
                out.append(a)
            elif total_instructions is None:
                raise ProfileError(f"{a.name}: static profile needs total_instructions to simulate")
            else:
                out.append(PhaseTrace.stationary(a, total_instructions))
        return out


# --- CSV ingestion ---------------------------------------------------------

def _read_rows(source, required):
    if isinstance(source, (bytes, bytearray)):
        source = source.decode("utf-8")
    reader = csv.DictReader(io.StringIO(source))
    if reader.fieldnames is None:
        raise ProfileError("empty profile file (header is mandatory)")
    header = [h.strip() for h in reader.fieldnames]
    missing = [c for c in required if c not in header]
    if missing:
        raise ProfileError(f"header lacks column(s): {', '.join(missing)}")
    reader.fieldnames = header
    for lineno, row in enumerate(reader, 2):
        yield lineno, {key: (val.strip() if isinstance(val, str) else val) for key, val in row.items()}


def _num(row, col, lineno, cast=float):
    raw = row.get(col)
    if raw is None or raw == "":
        raise ProfileError(f"row {lineno}: missing {col}")
    try:
        if cast is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        return cast(raw)
    except ValueError:
        raise ProfileError(f"row {lineno}: non-numeric {col} {raw!r}") from None


def _parse_way_rows(rows, has_bw, key_desc):
    """Collect per-way values; ``rows`` maps ways -> (lineno, row)."""
    out = {m: {} for m in ("ipc", "llcmpkc", "stall_frac", "bandwidth")}
    for ways, (lineno, row) in rows.items():
        ipc = _num(row, "ipc", lineno)
        if not ipc > 0:
            raise ProfileError(f"row {lineno}: non-positive ipc {ipc} for {key_desc}")
        out["ipc"][ways] = ipc
        out["llcmpkc"][ways] = _num(row, "llcmpkc", lineno)
        out["stall_frac"][ways] = _num(row, "stall_frac", lineno)
        if has_bw:
            out["bandwidth"][ways] = _num(row, "bandwidth", lineno)
    return out


def _build(name, per_way, k, has_bw):
    for w in range(1, k + 1):
        if w not in per_way["ipc"]:
            raise ProfileError(f"missing way {w} for {name}")
    tab = {m: [per_way[m][w] for w in range(1, k + 1)] for m in per_way if per_way[m] or m != "bandwidth"}
    try:
        return AppProfile(name, tab["ipc"], tab["llcmpkc"], tab["stall_frac"],
                          tab["bandwidth"] if has_bw else None)
    except ProfileError as exc:
        raise ProfileError(f"{name}: {exc}") from None


def _resolve_k(groups, cache, what):
    if cache is not None:
        return cache.nr_ways
    ks = {max(ways) for ways in groups}
    if len(ks) > 1:
        raise ProfileError(f"{what} disagree on way count: {sorted(ks)}")
    return ks.pop()


def load_profiles(source, cache: CacheConfig | None = None) -> list:
    """Parse profile CSV text (``app,ways,ipc,llcmpkc,stall_frac[,bandwidth]``).

    Apps are returned in order of first appearance. ``cache``, when given,
    fixes ``k``; otherwise every app must cover the same maximum way count.
    """
    by_app: dict = {}
    has_bw = None
    for lineno, row in _read_rows(source, PROFILE_COLUMNS):
        if has_bw is None:
            has_bw = "bandwidth" in row
        name = row["app"]
        if not name:
            raise ProfileError(f"row {lineno}: empty app name")
        ways = _num(row, "ways", lineno, int)
        if ways < 1:
            raise ProfileError(f"row {lineno}: way count {ways} < 1")
        if cache is not None and ways > cache.nr_ways:
            raise ProfileError(f"row {lineno}: way count {ways} exceeds k={cache.nr_ways} for {name}")
        rows = by_app.setdefault(name, {})
        if ways in rows:
            raise ProfileError(f"row {lineno}: duplicate way {ways} for {name}")
        rows[ways] = (lineno, row)
    if not by_app:
        return []
    k = _resolve_k([rows.keys() for rows in by_app.values()], cache, "apps")
    profiles = []
    for name, rows in by_app.items():
        per_way = _parse_way_rows(rows, has_bw, name)
        profiles.append(_build(name, per_way, k, has_bw))
    return profiles


def load_phase_traces(source, cache: CacheConfig | None = None) -> list:
    """Parse phase-trace CSV text.

    Columns: ``app,segment,duration_instr,ways,ipc,llcmpkc,stall_frac`` plus
    optional ``bandwidth`` and ``total_instr``. Without ``total_instr`` a run
    lasts one pass over the segments.
    """
    by_app: dict = {}
    totals: dict = {}
    has_bw = None
    for lineno, row in _read_rows(source, TRACE_COLUMNS):
        if has_bw is None:
            has_bw = "bandwidth" in row
        name = row["app"]
        seg = _num(row, "segment", lineno, int)
        dur = _num(row, "duration_instr", lineno, int)
        ways = _num(row, "ways", lineno, int)
        if ways < 1 or (cache is not None and ways > cache.nr_ways):
            raise ProfileError(f"row {lineno}: way count {ways} out of range for {name}")
        segs = by_app.setdefault(name, {})
        entry = segs.setdefault(seg, [dur, {}])
        if entry[0] != dur:
            raise ProfileError(f"row {lineno}: inconsistent duration_instr for {name} segment {seg}")
        if ways in entry[1]:
            raise ProfileError(f"row {lineno}: duplicate way {ways} for {name} segment {seg}")
        entry[1][ways] = (lineno, row)
        if row.get("total_instr"):
            total = _num(row, "total_instr", lineno, int)
            if totals.setdefault(name, total) != total:
                raise ProfileError(f"row {lineno}: inconsistent total_instr for {name}")
    if not by_app:
        return []
    k = _resolve_k([rows.keys() for segs in by_app.values() for _, rows in segs.values()],
                   cache, "trace segments")
    traces = []
    for name, segs in by_app.items():
        segments = []
        for seg_id in sorted(segs):
            dur, rows = segs[seg_id]
            desc = f"{name} segment {seg_id}"
            per_way = _parse_way_rows(rows, has_bw, desc)
            segments.append(Segment(dur, _build(name if len(segs) == 1 else desc, per_way, k, has_bw)
                                    .renamed(name)))
        total = totals.get(name, sum(s.duration for s in segments))
        traces.append(PhaseTrace(name, tuple(segments), total))
    return traces


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_profiles(profiles: Iterable[AppProfile]) -> str:
    """Serialize to profile CSV; floats use ``repr`` so reloading is bit-exact."""
    profiles = list(profiles)
    has_bw = bool(profiles) and all(p.bandwidth is not None for p in profiles)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PROFILE_COLUMNS + (("bandwidth",) if has_bw else ()))
    for p in profiles:
        for w in range(p.nr_ways):
            row = [p.name, w + 1, _fmt(p.ipc[w]), _fmt(p.llcmpkc[w]), _fmt(p.stall_frac[w])]
            if has_bw:
                row.append(_fmt(p.bandwidth[w]))
            writer.writerow(row)
    return buf.getvalue()


def dump_phase_traces(traces: Iterable[PhaseTrace]) -> str:
    traces = list(traces)
    has_bw = bool(traces) and all(s.tables.bandwidth is not None for t in traces for s in t.segments)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS + (("bandwidth",) if has_bw else ()) + ("total_instr",))
    for t in traces:
        for sid, seg in enumerate(t.segments):
            p = seg.tables
            for w in range(p.nr_ways):
                row = [t.name, sid, seg.duration, w + 1, _fmt(p.ipc[w]), _fmt(p.llcmpkc[w]),
                       _fmt(p.stall_frac[w])]
                if has_bw:
                    row.append(_fmt(p.bandwidth[w]))
                row.append(t.total_instructions)
                writer.writerow(row)
    return buf.getvalue()


# --- workload files --------------------------------------------------------

_CACHE_KEYS = {"nr_ways": int, "way_size_mib": float, "clock_hz": float, "peak_bandwidth": float}


def parse_workload(text: str, base_dir: str = ".", name: str = "workload") -> WorkloadSpec:
    """Parse a workload file.

    ``key=value`` lines configure the cache (``nr_ways``, ``way_size_mib``,
    ``clock_hz``, ``peak_bandwidth``) or point at data files (``profiles=``,
    ``traces=``, relative to ``base_dir``, repeatable). Every other non-blank,
    non-comment line names one app instance. Trace names shadow profile names.
    """
    cache_kw = {}
    profile_files, trace_files, refs = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = (s.strip() for s in line.partition("="))
            if key in _CACHE_KEYS:
                try:
                    cache_kw[key] = _CACHE_KEYS[key](float(val)) if key == "nr_ways" else float(val)
                except ValueError:
                    raise ProfileError(f"line {lineno}: bad value for {key}: {val!r}") from None
            elif key == "profiles":
                profile_files.append(val)
            elif key == "traces":
                trace_files.append(val)
            elif key == "name":
                name = val
            else:
                raise ProfileError(f"line {lineno}: unknown key {key!r}")
        else:
            refs.append((lineno, line))
    cache = CacheConfig(
        nr_ways=cache_kw.get("nr_ways", 11),
        way_size=cache_kw.get("way_size_mib", 2.5),
        clock_hz=cache_kw.get("clock_hz", 2e9),
        peak_bandwidth=cache_kw.get("peak_bandwidth"),
    )
    known: dict = {}
    for fname in profile_files:
        with open(os.path.join(base_dir, fname), encoding="utf-8") as fh:
            for p in load_profiles(fh.read(), cache):
                known[p.name] = p
    for fname in trace_files:
        with open(os.path.join(base_dir, fname), encoding="utf-8") as fh:
            for t in load_phase_traces(fh.read(), cache):
                known[t.name] = t
    apps = []
    for lineno, ref in refs:
        if ref not in known:
            raise ProfileError(f"line {lineno}: unknown application {ref!r}")
        apps.append(known[ref])
    return WorkloadSpec(tuple(apps), cache, name)


def load_workload(path: str) -> WorkloadSpec:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_workload(text, os.path.dirname(os.path.abspath(path)), stem)


def format_workload(app_names: Sequence[str], cache: CacheConfig, profiles_file: str | None = None,
                    traces_file: str | None = None, name: str | None = None,
                    comments: Sequence[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    if name:
        lines.append(f"name={name}")
    lines += [f"nr_ways={cache.nr_ways}", f"way_size_mib={cache.way_size!r}",
              f"clock_hz={int(cache.clock_hz) if float(cache.clock_hz).is_integer() else cache.clock_hz}"]
    if cache.peak_bandwidth is not None:
        lines.append(f"peak_bandwidth={cache.peak_bandwidth!r}")
    if profiles_file:
        lines.append(f"profiles={profiles_file}")
    if traces_file:
        lines.append(f"traces={traces_file}")
    lines += list(app_names)
    return "\n".join(lines) + "\n"
