from pathlib import Path

import pytest
from hypothesis import settings

from ntccrt.dsl import parse
from ntccrt.engine import Engine, StarPolicy, run

settings.register_profile("default", deadline=None)
settings.load_profile("default")

TESTS = Path(__file__).parent


def run_src(src, units=5, inputs=None, seed=0, star=None, continue_on_fail=False):
    policy = StarPolicy.parse(star) if isinstance(star, str) else star
    return run(parse(src), inputs or {}, units=units, seed=seed, star_policy=policy,
               continue_on_fail=continue_on_fail)


def engine_for(src, seed=0, star=None):
    policy = StarPolicy.parse(star) if isinstance(star, str) else star
    return Engine(parse(src), seed=seed, star_policy=policy)


@pytest.fixture
def tests_dir():
    return TESTS
