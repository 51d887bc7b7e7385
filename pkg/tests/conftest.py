import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spinbath.model import (CASE_ISOTROPIC, CASE_RANDOM, ModelSpec, Stream,
                            add_all_to_all_env, add_env_swbs, add_se_swbs,
                            build_ring, replace_random_env_bonds)

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_spec(index: int) -> ModelSpec:
    """A deterministic family of small mixed specs: cases, SWBs, random bonds."""
    sizes = [(1, 3), (2, 3), (2, 4), (3, 4), (2, 5), (3, 5), (4, 4), (2, 6), (3, 3)]
    n_sys, n_env = sizes[index % len(sizes)]
    case = CASE_RANDOM if index % 2 == 0 else CASE_ISOTROPIC
    spec = build_ring(n_sys, n_env, case, -0.15, 0.2, 0.2, Stream(100 + index))
    if index % 3 == 0 and n_env >= 5:
        spec = add_env_swbs(spec, 1, Stream(200 + index))
    if index % 4 == 1:
        spec = add_se_swbs(spec, 1, 1, Stream(300 + index))
    if index % 5 == 2 and n_env >= 4:
        spec = add_all_to_all_env(spec, Stream(400 + index))
    if case == CASE_ISOTROPIC and index % 3 == 2:
        spec = replace_random_env_bonds(spec, 1, 0.2, Stream(500 + index))
    return spec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
