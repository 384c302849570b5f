import json

import pytest
from hypothesis import given, strategies as st

from aamatch import (
    Market,
    MarketError,
    Matching,
    Policy,
    School,
    Student,
    convert_policy,
    market_to_json,
    parse_market,
    parse_matching,
    validate_matching,
)

from conftest import school_sets


def test_parse_ex1_fixture(ex1):
    assert set(ex1.majority_ids) == {"s1", "s3"}
    assert set(ex1.minority_ids) == {"s2", "s4"}
    assert ex1.capacities() == {"c1": 2, "c2": 2}
    assert ex1.quota_vector() == {"c1": 1, "c2": 0}
    assert ex1.reserve_vector() == {"c1": 1, "c2": 2}


def test_parse_rejects_empty_student_set():
    doc = {"students": [], "schools": [{"id": "c1", "capacity": 1, "priority": []}],
           "policy": {"kind": "none"}}
    with pytest.raises(MarketError, match="empty student set"):
        parse_market(json.dumps(doc))


def test_parse_rejects_quota_above_capacity():
    doc = {
        "students": [{"id": "s1", "type": "minority", "prefs": ["c1"]}],
        "schools": [{"id": "c1", "capacity": 2, "priority": ["s1"]}],
        "policy": {"kind": "majority_quota", "values": {"c1": 3}},
    }
    with pytest.raises(MarketError, match="quota exceeds capacity"):
        parse_market(json.dumps(doc))


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d["students"].append({"id": "s1", "type": "minority", "prefs": []}),
     "duplicate student id"),
    (lambda d: d["students"][0]["prefs"].append("c9"), "unknown school id"),
    (lambda d: d["schools"][0]["priority"].append("s9"), "unknown student id"),
    (lambda d: d.pop("policy"), "missing required field"),
    (lambda d: d["students"][0].pop("type"), "missing or non-string field"),
])
def test_parse_error_cases(mutate, message):
    doc = {
        "students": [{"id": "s1", "type": "minority", "prefs": ["c1"]}],
        "schools": [{"id": "c1", "capacity": 1, "priority": ["s1"]}],
        "policy": {"kind": "none"},
    }
    mutate(doc)
    with pytest.raises(MarketError, match=message):
        parse_market(json.dumps(doc))


def test_round_trip(ex1, ex2):
    for market in (ex1, ex2):
        again = parse_market(market_to_json(market))
        assert again == market
        assert market_to_json(again) == market_to_json(market)


@given(caps=st.dictionaries(st.sampled_from(["c1", "c2", "c3"]),
                            st.integers(min_value=1, max_value=6),
                            min_size=1, max_size=3),
       data=st.data())
def test_policy_conversion_is_involution(caps, data):
    values = {cid: data.draw(st.integers(0, cap)) for cid, cap in caps.items()}
    policy = Policy.majority_quota(values)
    back = convert_policy(convert_policy(policy, caps), caps)
    assert back == policy
    reserve = convert_policy(policy, caps)
    assert all(reserve.values[c] + values[c] == caps[c] for c in caps)


def test_validate_matching_feasible_quota_outcome(ex1):
    matching = Matching.from_student_assignment(
        ex1, {"s1": "c1", "s2": "c1", "s3": None, "s4": "c2"})
    report = validate_matching(ex1, ex1.policy, matching)
    assert report.ok


def test_validate_matching_flags_majority_cap(ex1):
    matching = Matching.from_student_assignment(
        ex1, {"s1": "c1", "s3": "c1", "s2": None, "s4": None})
    report = validate_matching(ex1, ex1.policy, matching)
    kinds = {v.kind for v in report.violations}
    assert kinds == {"majority_cap"}
    assert report.violations[0].subject == "c1"


def test_validate_matching_all_unmatched_is_feasible(ex1):
    matching = Matching.from_student_assignment(ex1, {})
    assert validate_matching(ex1, ex1.policy, matching).ok


def test_validate_matching_flags_capacity_and_consistency():
    market = Market(
        students=(Student("s1", "minority", ("c1",)), Student("s2", "minority", ("c1",))),
        schools=(School("c1", 1, ("s1", "s2")),),
        policy=Policy.none(),
    )
    broken = Matching(students={"s1": "c1", "s2": "c1"},
                      schools={"c1": frozenset({"s1"})})
    kinds = {v.kind for v in validate_matching(market, Policy.none(), broken).violations}
    assert "capacity" not in kinds  # only one student in the school set
    assert "consistency" in kinds

    over = Matching.from_student_assignment(market, {"s1": "c1", "s2": "c1"})
    kinds = {v.kind for v in validate_matching(market, Policy.none(), over).violations}
    assert kinds == {"capacity"}


def test_matching_file_round_trip(ex1):
    matching = Matching.from_student_assignment(ex1, {"s1": "c1", "s2": "c1", "s4": "c2"})
    text = json.dumps(matching.to_json_dict())
    again = parse_matching(text, ex1)
    assert again == matching
    assert school_sets(again) == {"c1": {"s1", "s2"}, "c2": {"s4"}}


def test_policy_values_default_fill(ex1):
    partial = ex1.with_policy(Policy.minority_reserve({"c2": 2}))
    assert partial.policy.values == {"c1": 0, "c2": 2}
    partial_q = ex1.with_policy(Policy.majority_quota({"c1": 1}))
    assert partial_q.policy.values == {"c1": 1, "c2": 2}


def test_student_unacceptable_everywhere_is_allowed():
    market = Market(
        students=(Student("s1", "minority", ("c1",)), Student("s2", "majority", ("c1",))),
        schools=(School("c1", 1, ("s1",)),),  # s2 listed nowhere
        policy=Policy.none(),
    )
    from aamatch import run_sosm

    out = run_sosm(market)
    assert out.matching.students["s2"] is None
