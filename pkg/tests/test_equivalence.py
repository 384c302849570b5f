import json

import numpy as np
import pytest

from aamatch import (
    Market,
    MarketError,
    Policy,
    School,
    Student,
    check_equivalence,
    effectively_competitive,
    split_school_quota,
    split_school_reserve,
)

from conftest import random_small_market


def test_ec_ex1_fails_at_c2(ex1):
    report = effectively_competitive(ex1)
    assert report.verdict is False
    by_school = {e.school: e for e in report.entries}
    assert by_school["c2"].reserve == 2
    assert by_school["c2"].first_choice_minorities == frozenset()
    assert not by_school["c2"].satisfied
    assert by_school["c1"].satisfied  # reserve 1, both minorities rank c1 first


def test_ec_ex2_fails_at_c1(ex2):
    report = effectively_competitive(ex2)
    assert report.verdict is False
    by_school = {e.school: e for e in report.entries}
    assert by_school["c1"].reserve == 2
    assert by_school["c1"].first_choice_minorities == frozenset({"s1"})
    assert not by_school["c1"].satisfied


def test_ec_vacuous_without_reserves(ex1):
    zero = Policy.minority_reserve({c: 0 for c in ex1.school_ids})
    report = effectively_competitive(ex1, zero)
    assert report.verdict is True
    assert report.entries == ()


def test_ec_accepts_either_policy_tag(ex1):
    as_quota = effectively_competitive(ex1, Policy.majority_quota(ex1.quota_vector()))
    as_reserve = effectively_competitive(ex1, Policy.minority_reserve(ex1.reserve_vector()))
    assert as_quota == as_reserve


# ---------------------------------------------------------------------------
# sub-school splits
# ---------------------------------------------------------------------------

def test_split_quota_ex1_c1(ex1):
    original, quota = split_school_quota(ex1, "c1", 1)
    assert (original.kind, original.capacity) == ("original", 1)
    assert original.priority == ("s1", "s2", "s3", "s4")
    assert (quota.kind, quota.capacity) == ("quota", 1)
    assert quota.priority == ("s2", "s4")  # minorities only, order preserved


@pytest.mark.parametrize("cap, expect_original, expect_quota", [(2, 2, 0), (0, 0, 2)])
def test_split_quota_degenerate(ex1, cap, expect_original, expect_quota):
    original, quota = split_school_quota(ex1, "c1", cap)
    assert original.capacity == expect_original
    assert quota.capacity == expect_quota


def test_split_quota_out_of_range(ex1):
    with pytest.raises(MarketError, match="out of range"):
        split_school_quota(ex1, "c1", 3)


def test_split_reserve_ex1_c2(ex1):
    unaffected, reserve = split_school_reserve(ex1, "c2", 2)
    assert (unaffected.kind, unaffected.capacity) == ("unaffected", 0)
    assert unaffected.priority == ("s1", "s2", "s3", "s4")
    assert (reserve.kind, reserve.capacity) == ("reserve", 2)
    # minorities lifted above majorities, within-group order intact
    assert reserve.priority == ("s2", "s4", "s1", "s3")


def test_split_reserve_zero(ex1):
    _, reserve = split_school_reserve(ex1, "c2", 0)
    assert reserve.capacity == 0


def test_split_reserve_minorities_only_school():
    market = Market(
        students=(Student("s1", "minority", ("c1",)), Student("s2", "minority", ("c1",))),
        schools=(School("c1", 2, ("s2", "s1")),),
        policy=Policy.minority_reserve({"c1": 1}),
    )
    _, reserve = split_school_reserve(market, "c1", 1)
    assert reserve.priority == ("s2", "s1")  # lifting is the identity here


def test_split_priority_agreement_on_random_markets():
    # The quota sub-school and the reserve sub-school rank minorities
    # identically; they differ only in whether majorities are acceptable.
    rng = np.random.default_rng(8)
    for _ in range(50):
        market = random_small_market(rng)
        reserve = market.reserve_vector()
        for cid, school in market.schools_by_id.items():
            _, quota_sub = split_school_quota(market, cid, school.capacity - reserve[cid])
            _, reserve_sub = split_school_reserve(market, cid, reserve[cid])
            minority_tail = tuple(s for s in reserve_sub.priority if s in market.minority_ids)
            assert quota_sub.priority == minority_tail
            majority_tail = tuple(s for s in reserve_sub.priority if s in market.majority_ids)
            assert reserve_sub.priority == minority_tail + majority_tail


# ---------------------------------------------------------------------------
# check_equivalence
# ---------------------------------------------------------------------------

def test_check_equivalence_ex1(ex1):
    cmp = check_equivalence(ex1)
    assert cmp.ec_verdict is False
    assert cmp.matchings_equal is False
    assert cmp.trace_equal is False
    assert cmp.consistent is True


def test_check_equivalence_ex2(ex2):
    cmp = check_equivalence(ex2)
    assert cmp.ec_verdict is False
    assert cmp.matchings_equal is True
    assert cmp.consistent is True


def test_check_equivalence_json(ex1):
    doc = json.loads(json.dumps(check_equivalence(ex1).to_json_dict()))
    assert doc["ec_verdict"] is False
    assert doc["matchings_equal"] is False
    assert doc["consistent"] is True
    assert doc["effective_competition"]["schools"][1]["school"] == "c2"


def test_check_equivalence_on_competitive_market():
    # Two minorities rank the reserved school first: effectively competitive,
    # so the outcomes and the round-by-round holds must coincide.
    market = Market(
        students=(
            Student("s1", "minority", ("c1", "c2")),
            Student("s2", "minority", ("c1", "c2")),
            Student("s3", "majority", ("c1", "c2")),
            Student("s4", "majority", ("c2", "c1")),
        ),
        schools=(School("c1", 2, ("s3", "s1", "s2", "s4")),
                 School("c2", 2, ("s1", "s2", "s3", "s4"))),
        policy=Policy.minority_reserve({"c1": 1, "c2": 0}),
    )
    cmp = check_equivalence(market)
    assert cmp.ec_verdict is True
    assert cmp.matchings_equal is True
    assert cmp.trace_equal is True
    assert cmp.consistent is True
