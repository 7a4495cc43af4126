import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from llcpart.errors import DomainError, ProfileError
from llcpart.profiles import (AppProfile, CacheConfig, PhaseTrace, Segment, WorkloadSpec,
                              dump_phase_traces, dump_profiles, interpolate, load_phase_traces,
                              load_profiles, load_workload, parse_workload, slowdown_at, table_at)
from llcpart.synthetic import sensitive, streaming, two_phase_trace


def csv_for(name, k, skip=()):
    rows = ["app,ways,ipc,llcmpkc,stall_frac"]
    for w in range(1, k + 1):
        if w not in skip:
            rows.append(f"{name},{w},{0.5 + 0.1 * w},{30 - w},0.2")
    return "\n".join(rows) + "\n"


def test_cache_defaults():
    c = CacheConfig()
    assert (c.nr_ways, c.way_size, c.clock_hz) == (11, 2.5, 2e9)


@pytest.mark.parametrize("kw", [{"nr_ways": 1}, {"way_size": 0}, {"clock_hz": -1}])
def test_cache_rejects_bad_values(kw):
    with pytest.raises(ProfileError):
        CacheConfig(**kw)


def test_load_single_app_slowdown_at_k_is_one():
    (p,) = load_profiles(csv_for("lbm", 11))
    assert p.nr_ways == 11
    assert p.slowdown[-1] == 1.0
    assert slowdown_at(p, 11) == 1.0


def test_missing_way_named():
    with pytest.raises(ProfileError, match="missing way 7 for lbm"):
        load_profiles(csv_for("lbm", 11, skip={7}))


def test_two_apps_keep_order():
    text = csv_for("b", 11) + csv_for("a", 11).split("\n", 1)[1]
    assert [p.name for p in load_profiles(text)] == ["b", "a"]


@pytest.mark.parametrize("bad,msg", [
    ("lbm,3,abc,1,0.1", "row 4: non-numeric ipc"),
    ("lbm,3,0,1,0.1", "row 4: non-positive ipc"),
    ("lbm,3,-1,1,0.1", "non-positive ipc"),
])
def test_bad_rows_name_the_row(bad, msg):
    text = "app,ways,ipc,llcmpkc,stall_frac\nlbm,1,1,1,0.1\nlbm,2,1,1,0.1\n" + bad + "\n"
    with pytest.raises(ProfileError, match=msg):
        load_profiles(text)


def test_k_mismatch_against_cache():
    with pytest.raises(ProfileError):
        load_profiles(csv_for("x", 12), CacheConfig(nr_ways=11))
    with pytest.raises(ProfileError, match="missing way"):
        load_profiles(csv_for("x", 8), CacheConfig(nr_ways=11))


def test_header_mandatory():
    with pytest.raises(ProfileError, match="header"):
        load_profiles("lbm,1,1,1,0.1\n")


def test_interpolation_example():
    ipc = [1.0, 1.0, 2.0] + [2.0] * 8
    p = AppProfile("x", ipc, [1.0] * 11, [0.1] * 11)
    assert p.slowdown[1] == 2.0 and p.slowdown[2] == 1.0
    assert slowdown_at(p, 2.5) == pytest.approx(1.5, abs=1e-15)


def test_sensitive_shape_drops():
    p = sensitive()
    assert slowdown_at(p, 1) > slowdown_at(p, 11) == 1.0


def test_table_at():
    p = AppProfile("x", [1.0] * 4, [20.0, 10.0, 5.0, 1.0], [0.1] * 4)
    assert table_at(p, "llcmpkc", 2) == 10.0
    assert table_at(p, "llcmpkc", 1.5) == 15.0
    with pytest.raises(ProfileError, match="metric unavailable"):
        table_at(p, "bandwidth", 2)


@pytest.mark.parametrize("w", [0.5, 0.0, 4.01, -1])
def test_domain_errors(w):
    p = AppProfile("x", [1.0] * 4, [1.0] * 4, [0.1] * 4)
    with pytest.raises(DomainError):
        slowdown_at(p, w)


def test_slowdown_clamped_at_one():
    # noisy table: ipc at 2 ways above the full-cache ipc
    p = AppProfile("x", [0.9, 1.1, 1.0], [1.0] * 3, [0.1] * 3)
    assert p.slowdown == (1.0 / 0.9, 1.0, 1.0)


def test_profile_validation():
    with pytest.raises(ProfileError):
        AppProfile("x", [1.0, 1.0], [1.0], [0.1, 0.1])
    with pytest.raises(ProfileError):
        AppProfile("x", [1.0, 1.0], [1.0, -1.0], [0.1, 0.1])
    with pytest.raises(ProfileError):
        AppProfile("x", [1.0, 1.0], [1.0, 1.0], [0.1, 1.5])
    with pytest.raises(ProfileError):
        AppProfile("x", [1.0, math.nan], [1.0, 1.0], [0.1, 0.1])


tables = st.integers(2, 12).flatmap(lambda k: st.tuples(
    st.lists(st.floats(0.01, 10.0), min_size=k, max_size=k),
    st.lists(st.floats(0.0, 100.0), min_size=k, max_size=k),
    st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k),
    st.one_of(st.none(), st.lists(st.floats(0.0, 1e10), min_size=k, max_size=k)),
))


@given(st.lists(tables, min_size=1, max_size=4).filter(lambda ts: len({len(t[0]) for t in ts}) == 1))
def test_round_trip_bit_exact(ts):
    has_bw = ts[0][3] is not None
    profs = [AppProfile(f"app{i}", ipc, llc, stall, (bw if has_bw and bw is not None else
                                                      ([1.0] * len(ipc) if has_bw else None)))
             for i, (ipc, llc, stall, bw) in enumerate(ts)]
    back = load_profiles(dump_profiles(profs))
    assert back == profs
    for a, b in zip(back, profs):
        assert a.ipc == b.ipc and a.slowdown == b.slowdown and a.bandwidth == b.bandwidth


@given(tables, st.floats(0.0, 1.0))
def test_slowdown_piecewise_linear_and_exact_at_knots(t, frac):
    ipc, llc, stall, _ = t
    p = AppProfile("x", ipc, llc, stall)
    k = p.nr_ways
    for w in range(1, k + 1):
        assert slowdown_at(p, w) == p.slowdown[w - 1]
    assert slowdown_at(p, k) == 1.0
    for lo in range(1, k):
        v = slowdown_at(p, lo + frac)
        a, b = p.slowdown[lo - 1], p.slowdown[lo]
        assert min(a, b) - 1e-12 <= v <= max(a, b) + 1e-12


def test_phase_trace_segments_and_wrap():
    t = PhaseTrace("x", (Segment(10, streaming(4)), Segment(5, sensitive(4))), 40)
    assert t.cycle_length == 15
    assert [t.segment_at(p) for p in (0, 9, 10, 14, 15, 26)] == [0, 0, 1, 1, 0, 1]
    assert t.segment_end(3) == 10 and t.segment_end(12) == 15 and t.segment_end(16) == 25


def test_phase_trace_average_profile_weights_cycles():
    a = AppProfile("a", [1.0, 1.0], [10.0, 10.0], [0.0, 0.0])
    b = AppProfile("b", [2.0, 2.0], [40.0, 40.0], [0.0, 0.0])
    t = PhaseTrace("t", (Segment(100, a), Segment(100, b)), 200)
    avg = t.average_profile()
    # 100 cycles at ipc 1, 50 cycles at ipc 2
    assert avg.ipc[0] == pytest.approx(200 / 150)
    assert avg.llcmpkc[0] == pytest.approx((100 * 10 + 50 * 40) / 150)


def test_trace_round_trip():
    t = two_phase_trace(5, first=1000, second=3000, total=5000)
    (back,) = load_phase_traces(dump_phase_traces([t]))
    assert back.total_instructions == 5000
    assert [s.duration for s in back.segments] == [1000, 3000]
    assert back.segments[1].tables.ipc == t.segments[1].tables.ipc


def test_trace_default_total_is_one_pass():
    text = ("app,segment,duration_instr,ways,ipc,llcmpkc,stall_frac\n"
            "f,0,100,1,1,2,0.1\nf,0,100,2,1,2,0.1\nf,1,50,1,1,30,0.1\nf,1,50,2,1,30,0.1\n")
    (t,) = load_phase_traces(text)
    assert t.total_instructions == 150 and len(t.segments) == 2


def test_workload_file(tmp_path):
    (tmp_path / "p.csv").write_text(csv_for("lbm", 11) + csv_for("xal", 11).split("\n", 1)[1])
    (tmp_path / "w.txt").write_text("# demo\nnr_ways=11\nway_size_mib=2.5\nclock_hz=2000000000\n"
                                    "profiles=p.csv\nlbm\nxal\nlbm\n")
    wl = load_workload(str(tmp_path / "w.txt"))
    assert wl.names == ["lbm", "xal", "lbm"] and wl.k == 11 and wl.name == "w"
    with pytest.raises(ProfileError, match="unknown application"):
        parse_workload("profiles=p.csv\nnope\n", str(tmp_path))
    with pytest.raises(ProfileError, match="unknown key"):
        parse_workload("bogus=1\n", str(tmp_path))


def test_workload_needs_apps_and_matching_k():
    with pytest.raises(ProfileError):
        WorkloadSpec(())
    with pytest.raises(ProfileError):
        WorkloadSpec((streaming(4),), CacheConfig(nr_ways=11))


def test_interpolate_direct():
    assert interpolate([4.0, 2.0, 1.0], 1.25) == 3.5
