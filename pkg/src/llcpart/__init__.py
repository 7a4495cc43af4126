"""Shared last-level-cache way-partitioning lab.

Profiles in, cluster assignments out: evaluate any clustering, run the LFOC
policy statically or in a discrete-time simulation, and compute exact
fairness/throughput optima for comparison.
"""
from .errors import (BudgetError, ConfigError, DomainError, FeasibilityError, LlcPartError,
                     ProfileError, SimulationError)
from .metrics import ClusterAssignment, EvalResult, effective_ways, evaluate, stp, unfairness
from .optimal import (Objective, SearchMode, best_static, count_clusterings, count_partitionings,
                      solve_optimal)
from .policies import (AppClass, LfocParams, baseline_assignments, classify, lfoc_partition,
                       lookahead)
from .profiles import (AppProfile, CacheConfig, PhaseTrace, Segment, WorkloadSpec, load_profiles,
                       slowdown_at, table_at)

__version__ = "0.1.0"
