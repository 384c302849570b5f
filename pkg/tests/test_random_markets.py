import collections

import numpy as np
import pytest
import scipy.stats

from aamatch import (
    RandomMarketParams,
    RegularityConstants,
    SchoolWeights,
    check_regularity,
    draw_preferences,
    generate_random_market,
    market_to_json,
    parse_market,
    run_sosm,
    run_sosm_r,
)
from aamatch.random_markets import _draw_indices


def test_constants_reject_large_exponent():
    with pytest.raises(ValueError, match=r"a must lie in \[0, 0.5\)"):
        RegularityConstants(a=0.6)


def test_reserved_seat_bound_is_ceiling():
    constants = RegularityConstants(a=0.25, theta=1.0)
    assert constants.reserved_seat_bound(1000) == 6  # ceil(1000**0.25) = ceil(5.62)
    assert constants.reserved_seat_bound(16) == 2
    assert RegularityConstants(theta=0.0).reserved_seat_bound(1000) == 0


# ---------------------------------------------------------------------------
# preference draws
# ---------------------------------------------------------------------------

def test_draw_full_length_uniform_is_permutation():
    rng = np.random.default_rng(0)
    ids = [f"c{i}" for i in range(6)]
    weights = SchoolWeights.uniform(6)
    counts = collections.Counter()
    for _ in range(500):
        draw = draw_preferences(ids, weights, "minority", 6, rng)
        assert sorted(draw) == sorted(ids)
        counts[draw[0]] += 1
    # every school shows up on top now and then
    assert set(counts) == set(ids)


def test_first_draw_frequency_matches_weights():
    rng = np.random.default_rng(42)
    weights = SchoolWeights((0.97, 0.01, 0.01, 0.01), (0.97, 0.01, 0.01, 0.01))
    ids = ["c1", "c2", "c3", "c4"]
    n_draws = 10_000
    hits = sum(draw_preferences(ids, weights, "majority", 1, rng)[0] == "c1"
               for _ in range(n_draws))
    sigma = (0.97 * 0.03 / n_draws) ** 0.5
    assert abs(hits / n_draws - 0.97) < 3 * sigma


def test_majorities_never_draw_zero_weight_school():
    rng = np.random.default_rng(1)
    weights = SchoolWeights((0.0, 0.5, 0.5), (0.2, 0.4, 0.4))
    ids = ["c1", "c2", "c3"]
    for _ in range(300):
        assert "c1" not in draw_preferences(ids, weights, "majority", 2, rng)
    with pytest.raises(ValueError, match="positive-weight"):
        draw_preferences(ids, weights, "majority", 3, rng)


def test_first_choice_distribution_chi_square():
    # Goodness of fit of minority first choices against beta over 1e5 draws.
    rng = np.random.default_rng(7)
    n = 25
    weights = SchoolWeights.ratio_bounded(n, ratio=3.0, rng=rng)
    beta = np.asarray(weights.minority)
    draws = 100_000
    counts = np.zeros(n, dtype=int)
    for _ in range(draws):
        counts[_draw_indices(beta, 1, rng)[0]] += 1
    stat = scipy.stats.chisquare(counts, f_exp=beta * draws)
    assert stat.pvalue > 1e-3


# ---------------------------------------------------------------------------
# the generator
# ---------------------------------------------------------------------------

def test_same_seed_byte_identical():
    params = RandomMarketParams(n_schools=12, n_students=9, pref_length=3,
                                capacity=2, n_reserved_seats=3, seed=99)
    a = market_to_json(generate_random_market(params))
    b = market_to_json(generate_random_market(params))
    assert a == b
    c = market_to_json(generate_random_market(
        RandomMarketParams(**{**params.to_json_dict(), "seed": 100})))
    assert c != a


def test_generated_market_round_trips_and_validates():
    params = RandomMarketParams(n_schools=8, n_students=10, pref_length=4,
                                capacity=2, n_reserved_seats=2, weight_ratio=2.0, seed=5)
    market = generate_random_market(params)
    assert parse_market(market_to_json(market)) == market
    for c in market.schools:
        # priorities are full permutations: complete, transitive, antisymmetric
        assert sorted(c.priority) == sorted(market.student_ids)
    for s in market.students:
        assert len(s.prefs) == 4
        assert len(set(s.prefs)) == 4


def test_zero_reserved_seats_behaves_like_no_policy():
    params = RandomMarketParams(n_schools=6, n_students=8, pref_length=3,
                                capacity=2, n_reserved_seats=0, seed=3)
    market = generate_random_market(params)
    assert set(market.policy.values.values()) == {0}
    assert run_sosm_r(market).matching == run_sosm(market).matching


def test_fully_reserved_school_gets_zero_majority_weight():
    # capacity 1 plus one reserved seat means zero majority quota there
    params = RandomMarketParams(n_schools=6, n_students=8, pref_length=3,
                                capacity=1, n_reserved_seats=2, seed=11)
    market = generate_random_market(params)
    reserved = {c for c, r in market.reserve_vector().items() if r > 0}
    assert len(reserved) == 2
    for s in market.students:
        if s.is_majority:
            assert not reserved & set(s.prefs)


def test_generator_output_passes_regularity_checker():
    constants = RegularityConstants(a=0.25, lam=1.0, kappa=1.0, theta=1.0,
                                    r=1.0, k=5, q_bar=2)
    seq = [RandomMarketParams.from_constants(constants, n, seed=n)
           for n in (10, 30, 100, 300, 1000)]
    report = check_regularity(seq, constants)
    assert report.all_ok
    for row in report.rows:
        assert row.all_ok


def test_regularity_checker_flags_violations():
    constants = RegularityConstants(a=0.25, lam=1.0, kappa=1.0, theta=1.0,
                                    r=1.0, k=5, q_bar=2)
    # twice as many students as lam allows
    crowded = RandomMarketParams(n_schools=20, n_students=40, pref_length=5,
                                 capacity=2, n_reserved_seats=2, seed=1)
    row = check_regularity([crowded], constants).rows[0]
    assert not row.student_growth
    assert row.pref_length_bounded and row.capacity_bounded
    # floor(theta * n^a) seats always satisfies the growth condition
    import math
    n = 256
    ok = RandomMarketParams(n_schools=n, n_students=n, pref_length=5, capacity=2,
                            n_reserved_seats=int(math.floor(n ** 0.25)), seed=2)
    assert check_regularity([ok], constants).rows[0].reserve_growth


def test_from_constants_validates_consistency():
    tight = RegularityConstants(a=0.25, lam=1.0, kappa=1.5, theta=1.0,
                                r=1.0, k=5, q_bar=2)
    with pytest.raises(ValueError, match="excess capacity"):
        RandomMarketParams.from_constants(tight, 100)
    small = RegularityConstants(k=5)
    with pytest.raises(ValueError, match="exceeds school count"):
        RandomMarketParams.from_constants(small, 3)


def test_params_json_round_trip():
    params = RandomMarketParams(n_schools=8, n_students=10, pref_length=4,
                                capacity=2, n_reserved_seats=2, weight_ratio=2.0, seed=5)
    assert RandomMarketParams.from_json_dict(params.to_json_dict()) == params
