import numpy as np
import pytest

from aamatch import (
    Market,
    MarketError,
    Matching,
    Policy,
    School,
    SearchCapExceeded,
    Student,
    enumerate_stable,
    find_blocking_pairs_quota,
    find_blocking_pairs_reserve,
    is_individually_rational,
    run_sosm_q,
    run_sosm_r,
    verify_student_optimal,
)

from conftest import random_small_market


def test_single_pair_market_has_one_stable_matching():
    market = Market(
        students=(Student("s1", "minority", ("c1",)),),
        schools=(School("c1", 1, ("s1",)),),
        policy=Policy.minority_reserve({"c1": 0}),
    )
    ss = enumerate_stable(market, market.policy)
    assert len(ss.stable) == 1
    assert ss.stable[0].students["s1"] == "c1"  # staying unmatched is blocked by the vacancy
    out = run_sosm_r(market)
    assert verify_student_optimal(market, market.policy, out.matching, ss)


def test_mechanism_outputs_are_members(ex1):
    qpol = Policy.majority_quota(ex1.quota_vector())
    rpol = Policy.minority_reserve(ex1.reserve_vector())
    ss_q = enumerate_stable(ex1, qpol)
    ss_r = enumerate_stable(ex1, rpol)
    assert run_sosm_q(ex1, policy=qpol).matching in ss_q.stable
    assert run_sosm_r(ex1, policy=rpol).matching in ss_r.stable
    assert ss_q.examined > 0 and ss_r.examined > 0
    assert verify_student_optimal(ex1, qpol, run_sosm_q(ex1, policy=qpol).matching, ss_q)
    assert verify_student_optimal(ex1, rpol, run_sosm_r(ex1, policy=rpol).matching, ss_r)


def test_search_cap_enforced(ex1):
    with pytest.raises(SearchCapExceeded):
        enumerate_stable(ex1, Policy.minority_reserve(ex1.reserve_vector()), search_cap=3)


def test_verify_requires_membership(ex1):
    rpol = Policy.minority_reserve(ex1.reserve_vector())
    ss = enumerate_stable(ex1, rpol)
    outsider = Matching.from_student_assignment(ex1, {})
    with pytest.raises(MarketError, match="not stable"):
        verify_student_optimal(ex1, rpol, outsider, ss)


def test_optimality_is_false_for_dominated_member():
    # Two stable matchings exist; the school-side best one is not optimal
    # for the students.
    market = Market(
        students=(Student("s1", "majority", ("c1", "c2")),
                  Student("s2", "majority", ("c2", "c1"))),
        schools=(School("c1", 1, ("s2", "s1")), School("c2", 1, ("s1", "s2"))),
        policy=Policy.minority_reserve({"c1": 0, "c2": 0}),
    )
    ss = enumerate_stable(market, market.policy)
    assert len(ss.stable) == 2
    student_best = run_sosm_r(market).matching
    other = next(m for m in ss.stable if m != student_best)
    assert verify_student_optimal(market, market.policy, student_best, ss)
    assert not verify_student_optimal(market, market.policy, other, ss)


def test_detector_consistency_on_enumerated_sets():
    # Membership in the stable set coincides with an empty detector plus
    # individual rationality, by construction; spot-check on random markets
    # by re-filtering each stable member.
    rng = np.random.default_rng(2)
    for _ in range(25):
        market = random_small_market(rng, max_schools=3, max_students=5, max_k=2,
                                     max_capacity=2, max_reserved=2)
        rpol = Policy.minority_reserve(market.reserve_vector())
        ss = enumerate_stable(market, rpol)
        for m in ss.stable:
            assert is_individually_rational(market, m)
            assert find_blocking_pairs_reserve(market, m, policy=rpol) == []
        qpol = Policy.majority_quota(market.quota_vector())
        for m in enumerate_stable(market, qpol).stable:
            assert find_blocking_pairs_quota(market, m, policy=qpol) == []


def test_mechanisms_agree_with_oracle_on_random_markets():
    rng = np.random.default_rng(31)
    for _ in range(60):
        market = random_small_market(rng, max_schools=4, max_students=6, max_k=3,
                                     max_capacity=2, max_reserved=2)
        qpol = Policy.majority_quota(market.quota_vector())
        rpol = Policy.minority_reserve(market.reserve_vector())
        for pol, runner in ((qpol, run_sosm_q), (rpol, run_sosm_r)):
            out = runner(market, policy=pol, record_trace=False)
            ss = enumerate_stable(market, pol)
            assert out.matching in ss.stable
            assert verify_student_optimal(market, pol, out.matching, ss)
