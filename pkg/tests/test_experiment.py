import csv
import io
import json

import pytest

from llcpart.errors import ConfigError, LlcPartError
from llcpart.experiment import (ROW_FIELDS, ExperimentSpec, ReportRow, gen_workload,
                                instance_counts, report, rows_from_dicts, run_experiment)
from llcpart.policies import AppClass, classify
from llcpart.profiles import WorkloadSpec
from llcpart.synthetic import fixture_pool, sensitive, streaming, two_phase_trace, light_sharing

POOL = fixture_pool()


def test_gen_workload_mixes():
    wl = gen_workload(POOL, 4, (0, 0, 4), seed=1)
    assert wl.n == 4 and all(classify(p) is AppClass.LIGHT_SHARING for p in wl.apps)
    wl = gen_workload(POOL, 8, (2, 3, 3), seed=9)
    got = [classify(p) for p in wl.apps]
    assert (got.count(AppClass.STREAMING), got.count(AppClass.SENSITIVE),
            got.count(AppClass.LIGHT_SHARING)) == (2, 3, 3)
    assert sum(instance_counts(wl).values()) == 8


def test_gen_workload_deterministic():
    assert gen_workload(POOL, 8, (2, 3, 3), 5) == gen_workload(POOL, 8, (2, 3, 3), 5)


def test_gen_workload_errors():
    with pytest.raises(ConfigError, match="no streaming"):
        gen_workload([light_sharing()], 2, (1, 0, 1), 0)
    with pytest.raises(ConfigError):
        gen_workload(POOL, 3, (1, 1, 2), 0)
    with pytest.raises(ConfigError):
        gen_workload(POOL, 2, (1, 1), 0)


def workloads():
    return [gen_workload(POOL, 6, (1, 2, 3), s) for s in (1, 2)]


def test_none_only_normalizes_to_one():
    rows = run_experiment(ExperimentSpec(workloads(), ["none"]))
    assert all(r.normalized_unfairness == 1.0 and r.normalized_stp == 1.0 for r in rows)


def test_dominance_rows():
    rows = run_experiment(ExperimentSpec(workloads(), ["lfoc", "none", "best_static"]))
    by = {(r.workload, r.policy): r for r in rows}
    for wl in workloads():
        best, lfoc, none = (by[(wl.name, p)] for p in ("best_static", "lfoc", "none"))
        assert best.normalized_unfairness <= 1.0
        assert best.unfairness <= lfoc.unfairness
        assert lfoc.normalized_unfairness == lfoc.unfairness / none.unfairness


def test_baseline_added_but_not_reported():
    rows = run_experiment(ExperimentSpec(workloads()[:1], ["lfoc"]))
    assert [r.policy for r in rows] == ["lfoc"]


def test_parallel_rows_match_serial():
    spec = dict(workloads=workloads(), policies=["lfoc", "none", "equal_partition"])
    a = run_experiment(ExperimentSpec(**spec))
    b = run_experiment(ExperimentSpec(**spec, workers=2))
    strip = lambda rows: [(r.workload, r.policy, r.unfairness, r.stp) for r in rows]
    assert strip(a) == strip(b)


def test_dynamic_mode():
    wl = WorkloadSpec((two_phase_trace(total=2 * 10**9), sensitive(), light_sharing()))
    rows = run_experiment(ExperimentSpec([wl], ["lfoc", "none", "best_static"], "dynamic",
                                         total_instructions=2 * 10**9))
    assert [r.policy for r in rows] == ["lfoc", "none", "best_static"]
    assert rows[0].algorithm_invocations > 0 and rows[1].normalized_unfairness == 1.0


def test_spec_validation():
    with pytest.raises(ConfigError):
        run_experiment(ExperimentSpec([], ["none"]))
    with pytest.raises(ConfigError):
        run_experiment(ExperimentSpec(workloads(), []))
    with pytest.raises(ConfigError):
        run_experiment(ExperimentSpec(workloads(), ["optimal_partitioning"], "dynamic",
                                      total_instructions=10**9))
    with pytest.raises(ConfigError, match="phase traces"):
        run_experiment(ExperimentSpec(workloads(), ["none"], "dynamic"))


def test_errors_tagged_with_cell():
    big = WorkloadSpec(tuple(light_sharing() for _ in range(12)), name="big")
    with pytest.raises(LlcPartError, match="big/equal_partition"):
        run_experiment(ExperimentSpec([big], ["equal_partition"]))


def row(w, p, u=1.5):
    return ReportRow(w, p, u, 3.0, u / 2, 1.0, 0.1, 1)


def test_report_formats():
    assert report([], "csv") == ",".join(ROW_FIELDS) + "\n"
    one = [row("w1", "lfoc")]
    assert rows_from_dicts(json.loads(report(one, "json"))) == one
    rows = [row(w, p) for w in ("w1", "w2") for p in ("lfoc", "none")]
    pd = json.loads(report(rows, "plotdata"))
    assert pd["x"] == ["w1", "w2"] and set(pd["series"]) == {"lfoc", "none"}
    assert all(len(v) == 2 for v in pd["series"].values())
    parsed = list(csv.DictReader(io.StringIO(report(rows, "csv"))))
    assert len(parsed) == 4 and tuple(parsed[0]) == ROW_FIELDS
    with pytest.raises(ConfigError):
        report(rows, "xml")
    with pytest.raises(ConfigError):
        rows_from_dicts([{"workload": "w"}])
