"""Brute-force enumeration of all stable matchings on small markets.

The search walks student-assignment vectors (each student gets an acceptable
school or stays unmatched), prunes capacity and majority-cap violations as it
goes, and keeps the assignments that are individually rational on both sides
and admit no blocking pair under the requested policy notion. Intended as an
independent certificate for the mechanisms, not as a production path.
"""
from __future__ import annotations

from dataclasses import dataclass

from .market import Market, MarketError, Matching, Policy, POLICY_QUOTA, POLICY_RESERVE
from .mechanisms import (
    find_blocking_pairs_quota,
    find_blocking_pairs_reserve,
    is_individually_rational,
)

DEFAULT_SEARCH_CAP = 10_000_000


class SearchCapExceeded(RuntimeError):
    """The assignment space is too large for exhaustive search."""


@dataclass(frozen=True)
class StableSet:
    policy_kind: str
    stable: tuple[Matching, ...]
    examined: int  # feasible assignment vectors inspected


def enumerate_stable(market: Market, policy: Policy, *,
                     search_cap: int = DEFAULT_SEARCH_CAP) -> StableSet:
    """Enumerate every stable matching under ``policy``.

    The raw space is the product over students of (acceptable schools + 1);
    raises SearchCapExceeded when that exceeds ``search_cap``. Feasible means
    within capacity, and within the majority cap when the policy is a quota.
    """
    if policy.kind not in (POLICY_QUOTA, POLICY_RESERVE):
        raise MarketError(f"oracle supports quota or reserve policies, got {policy.kind!r}")
    policy = market.with_policy(policy).policy
    space = 1
    for s in market.students:
        space *= len(s.prefs) + 1
        if space > search_cap:
            raise SearchCapExceeded(
                f"assignment space exceeds cap ({space} > {search_cap})")

    student_ids = list(market.student_ids)
    caps = market.capacities()
    quota = policy.values if policy.kind == POLICY_QUOTA else None
    detector = (find_blocking_pairs_quota if policy.kind == POLICY_QUOTA
                else find_blocking_pairs_reserve)

    stable: list[Matching] = []
    examined = 0
    assignment: dict[str, str | None] = {}
    load: dict[str, int] = {cid: 0 for cid in market.school_ids}
    majority_load: dict[str, int] = {cid: 0 for cid in market.school_ids}

    def recurse(i: int) -> None:
        nonlocal examined
        if i == len(student_ids):
            examined += 1
            matching = Matching.from_student_assignment(market, assignment)
            if not is_individually_rational(market, matching):
                return
            if not detector(market, matching, policy=policy):
                stable.append(matching)
            return
        sid = student_ids[i]
        student = market.students_by_id[sid]
        is_majority = student.is_majority
        for cid in (*student.prefs, None):
            if cid is not None:
                if load[cid] == caps[cid]:
                    continue
                if quota is not None and is_majority and majority_load[cid] == quota[cid]:
                    continue
                load[cid] += 1
                if is_majority:
                    majority_load[cid] += 1
            assignment[sid] = cid
            recurse(i + 1)
            if cid is not None:
                load[cid] -= 1
                if is_majority:
                    majority_load[cid] -= 1
        del assignment[sid]

    recurse(0)
    return StableSet(policy.kind, tuple(stable), examined)


def verify_student_optimal(market: Market, policy: Policy, matching: Matching,
                           stable_set: StableSet) -> bool:
    """True when every student weakly prefers ``matching`` to every other
    member of the stable set. Raises if ``matching`` is not itself a member."""
    if matching not in stable_set.stable:
        raise MarketError("matching not stable: it is not a member of the stable set")
    ranks = {
        s.id: {cid: i for i, cid in enumerate(s.prefs)}
        for s in market.students
    }
    unmatched_rank = max((len(s.prefs) for s in market.students), default=0) + 1

    def rank_of(sid: str, cid: str | None) -> int:
        if cid is None:
            return unmatched_rank
        return ranks[sid].get(cid, unmatched_rank + 1)

    for other in stable_set.stable:
        for sid in market.student_ids:
            if rank_of(sid, matching.students[sid]) > rank_of(sid, other.students[sid]):
                return False
    return True
