import random

import pytest
from hypothesis import HealthCheck, settings

from llcpart.profiles import AppProfile, CacheConfig, WorkloadSpec
from llcpart.synthetic import random_monotone

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def flat(name, k, ipc=1.0, llc=0.5, stall=0.05):
    return AppProfile(name, [ipc] * k, [llc] * k, [stall] * k)


def random_workload(seed, n_range=(2, 5), k_range=(4, 8)):
    rng = random.Random(seed)
    n = rng.randint(*n_range)
    k = rng.randint(*k_range)
    apps = tuple(random_monotone(rng, k, f"a{i}") for i in range(n))
    return WorkloadSpec(apps, CacheConfig(nr_ways=k), f"rand{seed}")


@pytest.fixture
def cache11():
    return CacheConfig()
