import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from llcpart import kernels
from llcpart.errors import BudgetError, ConfigError, FeasibilityError
from llcpart.metrics import ClusterAssignment, evaluate
from llcpart.optimal import (Objective, SearchMode, best_static, compositions, count_clusterings,
                             count_partitionings, count_space, iter_clusterings, iter_partitionings,
                             objective_key, set_partitions, solve_optimal, stirling2)
from llcpart.profiles import CacheConfig, WorkloadSpec
from llcpart.synthetic import random_monotone, sensitive

from conftest import random_workload


def stirling_explicit(n, m):
    # inclusion-exclusion closed form, independent of the recurrence
    return int(sum(Fraction((-1) ** j * math.comb(m, j) * (m - j) ** n) for j in range(m + 1))
               / math.factorial(m))


def brute_force_space(n, k, singletons):
    """Every (label vector, way vector) pair, deduplicated as canonical assignments."""
    seen = set()
    for labels in itertools.product(range(n), repeat=n):
        used = sorted(set(labels))
        if singletons and len(used) != n:
            continue
        m = len(used)
        if m > k:
            continue
        clusters = [tuple(i for i in range(n) if labels[i] == c) for c in used]
        for ways in itertools.product(range(1, k + 1), repeat=m):
            if sum(ways) == k:
                seen.add(ClusterAssignment(tuple(clusters), ways).key())
    return seen


def test_counts_against_known_values():
    assert count_partitionings(8, 11) == 120
    assert count_partitionings(8, 20) == 50388 == math.comb(19, 7)
    assert count_clusterings(8, 20) == 9_788_801
    assert count_clusterings(11, 20) > 5.5e9
    assert count_clusterings(11, 20) == 5_616_700_277
    assert count_partitionings(1, 7) == 1
    assert count_clusterings(1, 9) == 1 and count_clusterings(6, 1) == 1


def test_count_space_dispatch():
    assert count_space(8, 11, "partitioning") == 120
    assert count_space(8, 11, SearchMode.CLUSTERING) == count_clusterings(8, 11)
    with pytest.raises(FeasibilityError):
        count_partitionings(12, 11)


@pytest.mark.parametrize("n", range(1, 12))
def test_stirling_matches_closed_form(n):
    for m in range(0, n + 1):
        assert stirling2(n, m) == stirling_explicit(n, m)


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 7) for k in range(1, 7)])
def test_enumerators_match_counts_and_brute_force(n, k):
    clus = [a.key() for a in iter_clusterings(n, k)]
    assert len(clus) == len(set(clus)) == count_clusterings(n, k)
    if n <= 5:
        assert set(clus) == brute_force_space(n, k, False)
    assert all(ClusterAssignment(*c).is_feasible(n, k) for c in clus)
    if n <= k:
        parts = [a.key() for a in iter_partitionings(n, k)]
        assert len(parts) == len(set(parts)) == count_partitionings(n, k)
        if n <= 5:
            assert set(parts) == brute_force_space(n, k, True)
        assert count_clusterings(n, k) >= count_partitionings(n, k)


def test_set_partitions_and_compositions():
    assert [len(list(set_partitions(n))) for n in range(1, 7)] == [1, 2, 5, 15, 52, 203]
    assert list(compositions(4, 2)) == [(1, 3), (2, 2), (3, 1)]


def test_objective_order():
    assert objective_key(Objective.FAIRNESS, 1.2, 3.0) < objective_key(Objective.FAIRNESS, 1.2, 2.0)
    assert objective_key(Objective.THROUGHPUT, 1.9, 3.0) < objective_key(Objective.THROUGHPUT, 1.2, 2.0)


def test_single_app():
    wl = WorkloadSpec((sensitive(6),), CacheConfig(nr_ways=6))
    a, r = solve_optimal(wl)
    assert a == ClusterAssignment(((0,),), (6,)) and r.unfairness == 1.0


def test_identical_pair_partitioning_splits_evenly():
    p = sensitive(4)
    wl = WorkloadSpec((p, p), CacheConfig(nr_ways=4))
    for strategy in ("exhaustive", "branch_and_bound"):
        a, _ = solve_optimal(wl, "fairness", "partitioning", strategy)
        assert a.ways == (2, 2)


def test_partitioning_infeasible():
    wl = WorkloadSpec(tuple(sensitive(4) for _ in range(5)), CacheConfig(nr_ways=4))
    with pytest.raises(FeasibilityError):
        solve_optimal(wl, mode="partitioning")


def test_budget_and_strategy_errors():
    wl = random_workload(3, (6, 6), (8, 8))
    with pytest.raises(BudgetError):
        solve_optimal(wl, strategy="exhaustive", budget=100)
    with pytest.raises(ConfigError):
        solve_optimal(wl, strategy="annealing")


def same(a, b):
    return (a.assignment.key(), a.result.unfairness, a.result.stp) == \
        (b.assignment.key(), b.result.unfairness, b.result.stp)


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("objective", ["fairness", "throughput"])
@pytest.mark.parametrize("mode", ["clustering", "partitioning"])
def test_branch_and_bound_matches_exhaustive(seed, objective, mode):
    wl = random_workload(seed, (2, 5), (4, 7))
    ex = solve_optimal(wl, objective, mode, "exhaustive")
    bb = solve_optimal(wl, objective, mode, "branch_and_bound")
    assert same(ex, bb)


@pytest.mark.parametrize("seed", range(6))
def test_bandwidth_model_matches_exhaustive(seed):
    rng = random.Random(seed)
    k = rng.randint(4, 7)
    apps = tuple(random_monotone(rng, k, f"a{i}") for i in range(rng.randint(2, 4)))
    wl = WorkloadSpec(apps, CacheConfig(nr_ways=k, peak_bandwidth=rng.uniform(3.0, 15.0)))
    for obj in ("fairness", "throughput"):
        ex = solve_optimal(wl, obj, strategy="exhaustive", bandwidth_model="linear")
        bb = solve_optimal(wl, obj, bandwidth_model="linear")
        assert same(ex, bb)


def test_solution_matches_metrics_evaluate():
    wl = random_workload(7)
    sol = best_static(wl)
    r = evaluate(sol.assignment, wl)
    assert (r.unfairness, r.stp) == (sol.result.unfairness, sol.result.stp)
    d = sol.to_dict()
    for key in ("assignment", "unfairness", "stp", "nodes_explored", "nodes_pruned", "wall_time_ms"):
        assert key in d


@pytest.mark.parametrize("seed", range(4))
def test_backends_agree(seed, monkeypatch):
    wl = random_workload(100 + seed, (4, 6), (6, 8))
    results = []
    for name, fn in kernels.backends().items():
        monkeypatch.setattr(kernels, "search_compositions", fn)
        results.append(solve_optimal(wl))
    assert all(same(results[0], r) for r in results[1:])
    assert all(r.nodes_explored == results[0].nodes_explored for r in results)


@pytest.mark.parametrize("seed", range(3))
def test_parallel_is_deterministic(seed):
    wl = random_workload(200 + seed, (6, 7), (8, 9))
    base = solve_optimal(wl, workers=1)
    for w in (2, 3):
        assert same(base, solve_optimal(wl, workers=w))


@given(st.integers(0, 10_000))
def test_dominance_chain(seed):
    wl = random_workload(seed, (2, 4), (4, 6))
    clus = solve_optimal(wl, mode="clustering")
    part = solve_optimal(wl, mode="partitioning")
    assert clus.result.unfairness <= part.result.unfairness
    from llcpart.policies import lfoc_from_profiles
    a, _ = lfoc_from_profiles(wl.profiles, wl.k)
    assert clus.result.unfairness <= evaluate(a, wl).unfairness


def test_branch_and_bound_prunes():
    wl = random_workload(5, (7, 7), (9, 9))
    sol = solve_optimal(wl)
    assert sol.nodes_pruned > 0
    assert sol.nodes_explored < count_clusterings(7, 9)
