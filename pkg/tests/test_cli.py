import json
import subprocess
import sys

import pytest

from llcpart.cli import main, parse_assignment
from llcpart.metrics import ClusterAssignment
from llcpart.profiles import dump_phase_traces, format_workload, CacheConfig
from llcpart.synthetic import two_phase_trace


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def wl(tmp_path, capsys):
    path = tmp_path / "wl.txt"
    code, _, _ = run(capsys, "gen-workload", "--napps", "5", "--mix", "1,2,2", "--seed", "3",
                     "--out", str(path))
    assert code == 0
    return path


def test_count_space(capsys):
    assert run(capsys, "count-space", "--napps", "8", "--nways", "11", "--mode", "partitioning")[1] \
        == "120\n"
    assert run(capsys, "count-space", "--napps", "8", "--nways", "20")[1] == "9788801\n"
    code, out, _ = run(capsys, "count-space", "--napps", "11", "--nways", "20", "--json")
    assert json.loads(out)["count"] == 5616700277
    assert run(capsys, "count-space", "--napps", "12", "--nways", "11", "--mode",
               "partitioning")[0] == 1


def test_usage_errors_exit_2(capsys):
    for argv in (["count-space"], ["bogus"], ["count-space", "--napps", "x", "--nways", "3"]):
        with pytest.raises(SystemExit) as e:
            main(argv)
        assert e.value.code == 2
    capsys.readouterr()


def test_gen_workload_reproducible(tmp_path, wl, capsys):
    text = wl.read_text()
    assert "# seed=3" in text and "inputs_sha256=" in text
    again = tmp_path / "again.txt"
    run(capsys, "gen-workload", "--napps", "5", "--mix", "1,2,2", "--seed", "3", "--out", str(again))
    strip = lambda t: [line for line in t.splitlines() if not line.startswith("profiles=")]
    assert strip(again.read_text()) == strip(text)
    assert (tmp_path / "wl.profiles.csv").read_text() == (tmp_path / "again.profiles.csv").read_text()


def test_validate(tmp_path, wl, capsys):
    code, out, _ = run(capsys, "validate", str(wl), str(tmp_path / "wl.profiles.csv"))
    assert code == 0 and out.count("ok") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("app,ways,ipc,llcmpkc,stall_frac\nx,1,abc,1,0.1\n")
    code, out, _ = run(capsys, "validate", str(bad))
    assert code == 1 and "non-numeric ipc" in out


def test_evaluate_and_solve(wl, capsys):
    code, out, _ = run(capsys, "evaluate", "--workload", str(wl), "--assignment", "0,1:3|2,3,4:8")
    d = json.loads(out)
    assert code == 0 and len(d["per_app"]) == 5 and "inputs_sha256" in d["meta"]
    code, _, err = run(capsys, "evaluate", "--workload", str(wl), "--assignment", "0:11")
    assert code == 1 and "not covered" in err
    code, out, _ = run(capsys, "solve-optimal", "--workload", str(wl))
    d = json.loads(out)
    for key in ("assignment", "unfairness", "stp", "nodes_explored", "nodes_pruned", "wall_time_ms"):
        assert key in d
    code, out2, _ = run(capsys, "solve-optimal", "--workload", str(wl), "--strategy", "exhaustive")
    assert json.loads(out2)["assignment"] == d["assignment"]
    code, _, err = run(capsys, "solve-optimal", "--workload", str(wl), "--strategy", "exhaustive",
                       "--budget", "10")
    assert code == 1 and "budget" in err


def test_parse_assignment():
    a = ClusterAssignment(((0, 1), (2,)), (3, 8))
    assert parse_assignment("0,1:3|2:8") == a
    assert parse_assignment("{0,1}:3 | {2}:8") == a
    assert parse_assignment(json.dumps(a.to_dict())) == a


def test_run_policy_and_report(tmp_path, wl, capsys):
    rows = tmp_path / "rows.json"
    code, _, _ = run(capsys, "run-policy", "--workload", str(wl), "--policies",
                     "lfoc,none,best_static", "--seed", "4", "--out", str(rows))
    data = json.loads(rows.read_text())
    assert code == 0 and data["meta"]["seed"] == 4 and len(data["rows"]) == 3
    code, out, _ = run(capsys, "report", "--rows", str(rows), "--format", "csv")
    assert out.splitlines()[0].startswith("workload,policy,unfairness")
    code, out, _ = run(capsys, "report", "--rows", str(rows), "--format", "plotdata")
    assert set(json.loads(out)["series"]) == {"lfoc", "none", "best_static"}


def test_simulate(tmp_path, capsys):
    trace = two_phase_trace(first=500_000_000, second=1_500_000_000)
    (tmp_path / "t.csv").write_text(dump_phase_traces([trace]))
    (tmp_path / "w.txt").write_text(format_workload([trace.name], CacheConfig(), traces_file="t.csv"))
    code, out, _ = run(capsys, "simulate", "--workload", str(tmp_path / "w.txt"), "--completions", "1")
    d = json.loads(out)
    assert code == 0 and d["meta"]["seed"] == 0 and len(d["per_app"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "llcpart.cli", "count-space", "--napps", "8",
                          "--nways", "20", "--mode", "partitioning"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "50388"
