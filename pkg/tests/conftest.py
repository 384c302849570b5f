import json
from pathlib import Path

import numpy as np
import pytest

from aamatch import parse_market
from aamatch.random_markets import RandomMarketParams, generate_random_market

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def ex1():
    """Two schools, four students, counterpart policies quota (1,0) and
    reserve (1,2); the two mechanisms disagree here."""
    return parse_market((FIXTURES / "ex1.json").read_text())


@pytest.fixture(scope="session")
def ex2():
    """Two schools, three students, quota (1,1) / reserve (2,1); not
    effectively competitive yet the mechanisms agree."""
    return parse_market((FIXTURES / "ex2.json").read_text())


@pytest.fixture(scope="session")
def ex1_path():
    return FIXTURES / "ex1.json"


@pytest.fixture(scope="session")
def ex2_path():
    return FIXTURES / "ex2.json"


def random_small_market(rng: np.random.Generator, *, max_schools=10, max_students=20,
                        max_k=5, max_capacity=3, max_reserved=4):
    """One random small market with a minority-reserve policy, suitable for
    exhaustive sweeps. Reserve counts stay small enough that majority
    students always have k schools to draw from."""
    n = int(rng.integers(2, max_schools + 1))
    m = int(rng.integers(2, max_students + 1))
    k = int(rng.integers(1, min(max_k, n) + 1))
    cap = int(rng.integers(1, max_capacity + 1))
    share = float(rng.uniform(0.3, 0.6))
    max_res = min(n, max_reserved) if cap > 1 else max(0, min(n - k, max_reserved))
    n_res = int(rng.integers(0, max_res + 1))
    params = RandomMarketParams(
        n_schools=n,
        n_students=m,
        pref_length=k,
        capacity=cap,
        majority_share=share,
        n_reserved_seats=n_res,
        seed=int(rng.integers(0, 2**31)),
    )
    return generate_random_market(params)


def assignment_of(matching):
    return {sid: cid for sid, cid in matching.students.items()}


def school_sets(matching):
    return {cid: set(v) for cid, v in matching.schools.items()}


def load_json(path):
    return json.loads(Path(path).read_text())
