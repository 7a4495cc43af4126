"""``llcpart`` command line.

Exit status: 0 on success, 1 on a domain error (bad data, infeasible
assignment, budget exceeded ...), 2 on a usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

from . import __version__
from .dynsim import POLICIES as SIM_POLICIES
from .dynsim import SimConfig, run_simulation
from .errors import ConfigError, LlcPartError
from .experiment import (STATIC_POLICIES, ExperimentSpec, gen_workload, instance_counts, report,
                         rows_from_dicts, run_experiment, static_assignment)
from .metrics import ClusterAssignment, evaluate
from .optimal import count_space, solve_optimal
from .policies import DEFAULT_PARAMS, LfocParams, classify
from .profiles import (CacheConfig, dump_profiles, format_workload, load_phase_traces,
                       load_profiles, load_workload)
from .synthetic import fixture_pool


class UsageError(Exception):
    pass


def _hash_inputs(paths, extra="") -> str:
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            h.update(fh.read())
        h.update(b"\0")
    h.update(extra.encode())
    return h.hexdigest()


def _workload_inputs(path):
    """The workload file plus every data file it references."""
    out = [path]
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            key, sep, val = (s.strip() for s in line.partition("="))
            if sep and key in ("profiles", "traces"):
                out.append(os.path.join(base, val))
    return out


def _meta(args, paths, seed=None):
    # output destinations do not change the result, so they stay out of the hash
    extra = json.dumps({k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")},
                       default=str)
    meta = {"tool": "llcpart", "version": __version__,
            "inputs_sha256": _hash_inputs(paths, extra)}
    if seed is not None:
        meta["seed"] = seed
    return meta


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj, out):
    _emit(json.dumps(obj, indent=2) + "\n", out)


def _params(path):
    if not path:
        return DEFAULT_PARAMS
    with open(path, encoding="utf-8") as fh:
        return LfocParams.from_config(fh.read())


def parse_assignment(text: str) -> ClusterAssignment:
    """Parse ``"0,1:3|2:8"`` (braces and spaces optional) or the JSON list form."""
    text = text.strip()
    if text.startswith("["):
        try:
            return ClusterAssignment.from_dict(json.loads(text))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad assignment JSON: {exc}") from None
    clusters, ways = [], []
    for part in text.split("|"):
        members, sep, w = part.strip().partition(":")
        if not sep:
            raise UsageError(f"cluster {part.strip()!r} lacks ':ways'")
        try:
            clusters.append(tuple(int(x) for x in members.strip(" {}").split(",")))
            ways.append(int(w))
        except ValueError:
            raise UsageError(f"bad cluster {part.strip()!r}") from None
    return ClusterAssignment(tuple(clusters), tuple(ways))


# -- subcommands ------------------------------------------------------------

def _detect(path, text):
    head = text.lstrip().splitlines()[0] if text.strip() else ""
    cols = {c.strip() for c in head.split(",")}
    if "segment" in cols:
        return "traces", load_phase_traces(text)
    if "app" in cols:
        return "profiles", load_profiles(text)
    if any(line.split("#", 1)[0].strip().startswith(("profiles", "traces"))
           for line in text.splitlines()):
        return "workload", load_workload(path)
    return "params", LfocParams.from_config(text)


def cmd_validate(args):
    failed = 0
    for path in args.files:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
            kind, obj = _detect(path, text)
        except (LlcPartError, OSError) as exc:
            print(f"FAIL {path}: {exc}")
            failed += 1
            continue
        if kind in ("profiles", "traces"):
            detail = f"{len(obj)} apps"
        elif kind == "workload":
            detail = f"{obj.n} apps, k={obj.k}"
        else:
            detail = "parameters"
        print(f"ok   {path}: {kind}, {detail}")
    return 1 if failed else 0


def cmd_gen_workload(args):
    if args.pool:
        with open(args.pool, encoding="utf-8") as fh:
            pool = load_profiles(fh.read())
        inputs = [args.pool]
    else:
        pool = fixture_pool(args.nways)
        inputs = []
    try:
        mix = [int(x) for x in args.mix.split(",")]
    except ValueError:
        raise UsageError(f"--mix wants three comma-separated counts, got {args.mix!r}") from None
    params = _params(args.params)
    cache = CacheConfig(nr_ways=pool[0].nr_ways) if pool else CacheConfig()
    wl = gen_workload(pool, args.napps, mix, args.seed, cache, params, args.name)
    stem = os.path.splitext(args.out)[0]
    prof_path = stem + ".profiles.csv"
    used = list({p.name: p for p in wl.apps}.values())
    with open(prof_path, "w", encoding="utf-8") as fh:
        fh.write(dump_profiles(used))
    counts = instance_counts(wl)
    meta = _meta(args, inputs, args.seed)
    comments = [f"seed={args.seed}", f"inputs_sha256={meta['inputs_sha256']}",
                "instances: " + ", ".join(f"{k}={v}" for k, v in counts.items()),
                "classes: " + ", ".join(classify(p, params).value for p in wl.apps)]
    text = format_workload(wl.names, wl.cache, os.path.basename(prof_path), name=wl.name,
                           comments=comments)
    _emit(text, args.out)
    print(json.dumps({"workload": args.out, "profiles": prof_path, "instances": counts}))
    return 0


def cmd_evaluate(args):
    wl = load_workload(args.workload)
    a = parse_assignment(args.assignment)
    res = evaluate(a, wl, args.bandwidth_model).to_dict()
    res["meta"] = _meta(args, _workload_inputs(args.workload))
    _dump(res, args.out)
    return 0


def cmd_solve_optimal(args):
    wl = load_workload(args.workload)
    sol = solve_optimal(wl, args.objective, args.mode, args.strategy, budget=args.budget,
                        workers=args.workers, bandwidth_model=args.bandwidth_model)
    out = sol.to_dict()
    out["meta"] = _meta(args, _workload_inputs(args.workload))
    _dump(out, args.out)
    return 0


def cmd_count_space(args):
    value = count_space(args.napps, args.nways, args.mode)
    if args.json:
        print(json.dumps({"napps": args.napps, "nways": args.nways, "mode": args.mode, "count": value}))
    else:
        print(value)
    return 0


def _sim_config(args):
    params = _params(args.params)
    if args.no_early_stop:
        params = dataclasses.replace(params, early_stop=False)
    return SimConfig(tick=args.tick, params=params, completions_target=args.completions,
                     bandwidth_model=args.bandwidth_model, noise=args.noise,
                     max_time=args.max_time, mean=args.mean)


def cmd_run_policy(args):
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    paths = []
    for w in args.workload:
        paths += _workload_inputs(w)
    workloads = [load_workload(w) for w in args.workload]
    cfg = _sim_config(args)
    spec = ExperimentSpec(workloads, policies, args.mode, args.seed, args.out, cfg.params,
                          args.total_instructions, cfg, args.baseline, args.workers)
    rows = run_experiment(spec)
    out = {"meta": _meta(args, paths, args.seed), "rows": [r.to_dict() for r in rows]}
    if args.show_assignments and args.mode == "static":
        out["assignments"] = [
            {"workload": wl.name, "policy": p,
             "assignment": static_assignment(wl, p, cfg.params).to_dict()}
            for wl in workloads for p in policies]
    _dump(out, args.out)
    return 0


def cmd_simulate(args):
    wl = load_workload(args.workload)
    rep = run_simulation(wl, args.policy, _sim_config(args), args.seed, args.total_instructions)
    out = rep.to_dict()
    out["meta"] = _meta(args, _workload_inputs(args.workload), args.seed)
    _dump(out, args.out)
    return 0


def cmd_report(args):
    with open(args.rows, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except ValueError as exc:
            raise ConfigError(f"{args.rows}: not JSON ({exc})") from None
    items = data["rows"] if isinstance(data, dict) and "rows" in data else data
    if not isinstance(items, list):
        raise ConfigError(f"{args.rows}: expected a list of rows")
    _emit(report(rows_from_dicts(items), args.format, args.metric), args.out)
    return 0


# -- parser -----------------------------------------------------------------

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _add_sim_flags(p):
    p.add_argument("--params", help="LFOC parameter file (key=value lines)")
    p.add_argument("--tick", type=float, default=1e-3, help="simulated seconds per tick")
    p.add_argument("--completions", type=_positive_int, default=3)
    p.add_argument("--total-instructions", type=int, default=None,
                   help="run length for apps given as static profiles")
    p.add_argument("--no-early-stop", action="store_true", help="force full sampling sweeps")
    p.add_argument("--noise", type=float, default=0.0, help="relative noise on monitoring samples")
    p.add_argument("--max-time", type=float, default=3600.0)
    p.add_argument("--mean", choices=("geometric", "arithmetic"), default="geometric")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="llcpart", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"llcpart {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check profile, trace, workload or parameter files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-workload", help="draw a random workload with a given class mix")
    p.add_argument("--pool", help="profile CSV to draw from (default: built-in synthetic pool)")
    p.add_argument("--nways", type=_positive_int, default=11, help="k for the built-in pool")
    p.add_argument("--napps", type=_positive_int, required=True)
    p.add_argument("--mix", required=True, help="streaming,sensitive,light counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name")
    p.add_argument("--params")
    p.add_argument("--out", required=True, help="workload file to write")
    p.set_defaults(func=cmd_gen_workload)

    p = sub.add_parser("evaluate", help="score one assignment")
    p.add_argument("--workload", required=True)
    p.add_argument("--assignment", required=True, help='e.g. "0,1:3|2:8" or JSON')
    p.add_argument("--bandwidth-model", choices=("off", "linear"), default="off")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("solve-optimal", help="exact fairness/throughput optimum")
    p.add_argument("--workload", required=True)
    p.add_argument("--objective", choices=("fairness", "throughput"), default="fairness")
    p.add_argument("--mode", choices=("clustering", "partitioning"), default="clustering")
    p.add_argument("--strategy", choices=("branch_and_bound", "exhaustive"),
                   default="branch_and_bound")
    p.add_argument("--budget", type=float, default=1e8)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--bandwidth-model", choices=("off", "linear"), default="off")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_optimal)

    p = sub.add_parser("count-space", help="size of the clustering/partitioning space")
    p.add_argument("--napps", type=_positive_int, required=True)
    p.add_argument("--nways", type=_positive_int, required=True)
    p.add_argument("--mode", choices=("clustering", "partitioning"), default="clustering")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_count_space)

    p = sub.add_parser("run-policy", help="run policies over workloads, normalized to a baseline")
    p.add_argument("--workload", nargs="+", required=True)
    p.add_argument("--policies", "--policy", default="lfoc,none",
                   help=f"comma list from {','.join(STATIC_POLICIES)}")
    p.add_argument("--mode", choices=("static", "dynamic"), default="static")
    p.add_argument("--baseline", default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--bandwidth-model", choices=("off", "linear"), default="off")
    p.add_argument("--show-assignments", action="store_true")
    p.add_argument("--out")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_run_policy)

    p = sub.add_parser("simulate", help="dynamic simulation of one policy")
    p.add_argument("--workload", required=True)
    p.add_argument("--policy", choices=SIM_POLICIES, default="lfoc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bandwidth-model", choices=("off", "linear"), default="off")
    p.add_argument("--out")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="render run-policy rows as json, csv or plot data")
    p.add_argument("--rows", required=True, help="JSON written by run-policy")
    p.add_argument("--format", choices=("json", "csv", "plotdata"), default="json")
    p.add_argument("--metric", default="normalized_unfairness", help="value plotted by plotdata")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (LlcPartError, OSError) as exc:
        print(f"llcpart: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
