"""Synthetic per-way profiles and phase traces for tests, demos and the default pool.

The shaped fixtures mimic well-known SPEC CPU behaviours at k=11: a
streaming aggressor (lbm-like), a strongly cache-sensitive program
(xalancbmk-like), a moderately sensitive one (omnetpp-like) and
light-sharing fillers. None of the numbers come from hardware.
"""
from __future__ import annotations

import random

from .profiles import AppProfile, PhaseTrace, Segment


def _curve(k, s1, knee):
    # slowdown falling linearly from s1 at one way to 1.0 at ``knee`` ways
    out = []
    for w in range(1, k + 1):
        if w >= knee:
            out.append(1.0)
        else:
            out.append(s1 - (s1 - 1.0) * (w - 1) / (knee - 1))
    return out


def from_slowdowns(name, slowdowns, llcmpkc, stall=0.1, ipc_full=1.0, bandwidth=None):
    """Build a profile whose derived slowdown table equals ``slowdowns`` (last entry 1)."""
    ipc = [ipc_full / s for s in slowdowns]
    k = len(slowdowns)
    stall_t = [stall] * k if isinstance(stall, (int, float)) else list(stall)
    return AppProfile(name, ipc, list(llcmpkc), stall_t, bandwidth)


def streaming(k=11, name="lbm_like", llc=38.0):
    slow = [1.04 - 0.04 * (w - 1) / (k - 1) for w in range(1, k + 1)]
    slow[-1] = 1.0
    return from_slowdowns(name, slow, [llc] * k, 0.55, 0.9, [8.0] * k)


def sensitive(k=11, name="xalancbmk_like"):
    slow = _curve(k, 2.2, 8)
    llc = [max(1.0, 24.0 - 3.0 * (w - 1)) for w in range(1, k + 1)]
    return from_slowdowns(name, slow, llc, 0.3, 1.4, [3.0] * k)


def mildly_sensitive(k=11, name="omnetpp_like"):
    slow = _curve(k, 1.5, 6)
    llc = [max(1.0, 14.0 - 2.5 * (w - 1)) for w in range(1, k + 1)]
    return from_slowdowns(name, slow, llc, 0.25, 1.1, [2.0] * k)


def light_sharing(k=11, name="light", llc=0.6):
    slow = [1.02 - 0.02 * (w - 1) / (k - 1) for w in range(1, k + 1)]
    slow[-1] = 1.0
    return from_slowdowns(name, slow, [llc] * k, 0.05, 2.0, [0.3] * k)


def fixture_pool(k=11) -> list:
    """A small pool holding every class at least twice."""
    return [
        streaming(k, "lbm_like"),
        streaming(k, "libquantum_like", llc=25.0),
        sensitive(k, "xalancbmk_like"),
        mildly_sensitive(k, "omnetpp_like"),
        light_sharing(k, "povray_like"),
        light_sharing(k, "namd_like", llc=1.2),
        light_sharing(k, "gamess_like", llc=0.2),
    ]


def two_phase_trace(k=11, name="fotonik3d_like", first=2_000_000_000, second=20_000_000_000,
                    total=None) -> PhaseTrace:
    """Light-sharing start (llcmpkc about 2) followed by a long streaming phase."""
    ls = light_sharing(k, name + "_ls", llc=2.0)
    st = streaming(k, name + "_st", llc=30.0)
    total = first + second if total is None else total
    return PhaseTrace(name, (Segment(first, ls), Segment(second, st)), total)


def random_monotone(rng: random.Random, k: int, name: str) -> AppProfile:
    """Random profile with non-increasing slowdown and miss curves."""
    base = rng.uniform(0.3, 2.0)
    drops = sorted((rng.uniform(0.0, 1.5) for _ in range(k)), reverse=True)
    drops[-1] = 0.0
    ipc = [base / (1.0 + d) for d in drops]
    miss = sorted((rng.uniform(0.0, 40.0) for _ in range(k)), reverse=True)
    stall = sorted((rng.uniform(0.0, 0.6) for _ in range(k)), reverse=True)
    bw = sorted((rng.uniform(0.1, 10.0) for _ in range(k)), reverse=True)
    return AppProfile(name, ipc, miss, stall, bw)
