"""Compare the compiled and pure-Python composition-search kernels.

Per workload size two timings are taken for every available backend:
  partition  one kernel call over the one-app-per-cluster layout
  cluster    a full fairness branch-and-bound over every clustering

Usage: python benchmarks/bench_kernels.py [--sizes 4x8,6x11,8x11] [--repeat 3]
"""
import argparse
import random
import time

from llcpart import kernels
from llcpart.optimal import SearchMode, _Searcher
from llcpart.synthetic import random_monotone


def profiles(n, k, seed=0):
    rng = random.Random(seed)
    return [random_monotone(rng, k, f"a{i}") for i in range(n)]


def best_of(fn, repeat):
    out = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out = min(out, time.perf_counter() - t0)
    return out


def run(apps, k, impl, mode):
    s = _Searcher(apps, k, "fairness", None, search=impl)
    s.run(mode)
    return s.best[3]


def main():
    ap = argparse.ArgumentParser(description="kernel backend benchmark")
    ap.add_argument("--sizes", default="4x8,6x11,8x11")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled kernel not built; timing the Python backend only")
    print(f"{'n x k':>6} {'search':>12} " + "".join(f"{b:>12}" for b in impls) + "  speedup")
    for size in args.sizes.split(","):
        n, k = (int(x) for x in size.split("x"))
        apps = profiles(n, k)
        for mode in (SearchMode.PARTITIONING, SearchMode.CLUSTERING):
            if mode is SearchMode.PARTITIONING and n > k:
                continue
            answers = {name: run(apps, k, fn, mode) for name, fn in impls.items()}
            if len(set(answers.values())) != 1:
                raise SystemExit(f"backends disagree on {size}: {answers}")
            t = [best_of(lambda fn=fn: run(apps, k, fn, mode), args.repeat) for fn in impls.values()]
            speed = f"{t[0] / t[-1]:7.1f}x" if len(t) > 1 else ""
            print(f"{size:>6} {mode.value:>12} " + "".join(f"{x * 1e3:10.2f}ms" for x in t) + f"  {speed}")


if __name__ == "__main__":
    main()
