"""Student-proposing deferred-acceptance mechanisms and stability checkers.

Three mechanisms share one engine and differ only in the school choice rule:

* ``run_sosm``      - plain deferred acceptance, policy ignored.
* ``run_sosm_q``    - majority quota: each school admits at most ``quota``
                      majority students, minorities compete for every seat.
* ``run_sosm_r``    - minority reserve: each school first protects up to
                      ``reserve`` seats for its highest-priority minority
                      applicants, then fills the rest by priority alone.

``find_blocking_pairs_quota`` / ``find_blocking_pairs_reserve`` detect every
student-school pair that would jointly deviate from a given matching under
the corresponding stability notion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _engine
from ._engine import MODE_PLAIN, MODE_QUOTA, MODE_RESERVE, IndexedMarket
from .market import (
    POLICY_QUOTA,
    POLICY_RESERVE,
    Market,
    MarketError,
    Matching,
    Policy,
    RoundTrace,
    TraceRound,
)


class PolicyMismatchError(ValueError):
    """Raised when a mechanism is run with the wrong policy kind."""


@dataclass(frozen=True)
class MechanismOutput:
    matching: Matching
    trace: RoundTrace | None
    rounds: int


@dataclass(frozen=True)
class BlockingPair:
    student: str
    school: str
    clause: str  # "vacancy" | "i" | "ii" | "iii"


def run_sosm(market: Market, *, record_trace: bool = True) -> MechanismOutput:
    """Plain student-proposing deferred acceptance; any policy is ignored."""
    im = IndexedMarket.from_market(market)
    res = _engine.run_batch(im, MODE_PLAIN, record_trace=record_trace)
    return _materialize(market, im, res)


def run_sosm_q(market: Market, *, policy: Policy | None = None,
               record_trace: bool = True) -> MechanismOutput:
    """Deferred acceptance with per-school majority quotas.

    Uses the market's policy unless an explicit quota policy is given;
    raises PolicyMismatchError for any other kind.
    """
    policy = _resolve_policy(market, policy, POLICY_QUOTA)
    im = IndexedMarket.from_market(market)
    limits = _limit_vector(im, policy)
    res = _engine.run_batch(im, MODE_QUOTA, limits, record_trace=record_trace)
    return _materialize(market, im, res)


def run_sosm_r(market: Market, *, policy: Policy | None = None,
               record_trace: bool = True) -> MechanismOutput:
    """Deferred acceptance with per-school minority reserves."""
    policy = _resolve_policy(market, policy, POLICY_RESERVE)
    im = IndexedMarket.from_market(market)
    limits = _limit_vector(im, policy)
    res = _engine.run_batch(im, MODE_RESERVE, limits, record_trace=record_trace)
    return _materialize(market, im, res)


def run_sequential(market: Market, *, policy: Policy | None = None,
                   order: list[str] | None = None) -> Matching:
    """Introduce students one at a time (in ``order``) and settle each
    rejection chain before the next student enters.

    Produces the same matching as the batch mechanisms for every order; the
    policy kind selects the choice rule (none, quota or reserve).
    """
    policy = policy if policy is not None else market.policy
    im = IndexedMarket.from_market(market)
    if policy.kind == POLICY_QUOTA:
        mode, limits = MODE_QUOTA, _limit_vector(im, market.with_policy(policy).policy)
    elif policy.kind == POLICY_RESERVE:
        mode, limits = MODE_RESERVE, _limit_vector(im, market.with_policy(policy).policy)
    else:
        mode, limits = MODE_PLAIN, None
    idx_order = None
    if order is not None:
        pos = {sid: i for i, sid in enumerate(im.student_ids)}
        idx_order = [pos[sid] for sid in order]
    res = _engine.run_sequential(im, mode, limits, idx_order)
    return _matching_from_result(market, im, res)


def find_blocking_pairs_quota(market: Market, matching: Matching, *,
                              policy: Policy | None = None) -> list[BlockingPair]:
    """All pairs blocking ``matching`` under the majority-quota notion.

    A pair (s, c) with c preferred to s's assignment blocks when one of:
      vacancy: c has an empty seat, s is acceptable, and admitting s would
               not push c over its majority quota;
      i:   s is a minority with higher priority than someone c holds;
      ii:  s is a majority, the quota is slack, and s outranks someone held;
      iii: s is a majority, the quota binds, and s outranks a held majority.

    The matching must be structurally feasible (consistent, within capacity);
    the majority cap itself is not a precondition, so quota-violating
    matchings can still be diagnosed.
    """
    policy = _resolve_policy(market, policy, POLICY_QUOTA)
    _require_structural_feasibility(market, matching)
    quota = policy.values
    out: list[BlockingPair] = []
    for sid in market.student_ids:
        student = market.students_by_id[sid]
        for cid in _preferred_schools(market, student, matching.students[sid]):
            school = market.schools_by_id[cid]
            members = matching.schools[cid]
            held_majorities = [x for x in members if x in market.majority_ids]
            acceptable = sid in school.priority
            clause = None
            if len(members) < school.capacity and acceptable:
                if not student.is_majority or len(held_majorities) < quota[cid]:
                    clause = "vacancy"
            if clause is None and acceptable:
                if not student.is_majority:
                    if any(_outranks(school, sid, x) for x in members):
                        clause = "i"
                elif len(held_majorities) < quota[cid]:
                    if any(_outranks(school, sid, x) for x in members):
                        clause = "ii"
                elif any(_outranks(school, sid, x) for x in held_majorities):
                    clause = "iii"
            if clause is not None:
                out.append(BlockingPair(sid, cid, clause))
    return out


def find_blocking_pairs_reserve(market: Market, matching: Matching, *,
                                policy: Policy | None = None) -> list[BlockingPair]:
    """All pairs blocking ``matching`` under the minority-reserve notion.

    A pair (s, c) with c preferred to s's assignment blocks when one of:
      vacancy: c has an empty seat and s is acceptable to c;
      reserve: s is an acceptable minority and c, though full, holds fewer
               minorities than its reserve (a protected seat is occupied by
               a majority student that the reserve rule would bump);
      i:   s is a minority outranking someone c holds;
      ii:  s is a majority, c holds more minorities than its reserve, and s
           outranks someone held;
      iii: s is a majority, held minorities are within the reserve, and s
           outranks a held majority.

    Together the clauses coincide with blocking via the reserve choice rule:
    (s, c) blocks exactly when c would keep s out of (held + s). Without the
    reserve clause the mechanism output would not always be student-optimal
    among the matchings the detector accepts.
    """
    policy = _resolve_policy(market, policy, POLICY_RESERVE)
    _require_structural_feasibility(market, matching)
    reserve = policy.values
    out: list[BlockingPair] = []
    for sid in market.student_ids:
        student = market.students_by_id[sid]
        for cid in _preferred_schools(market, student, matching.students[sid]):
            school = market.schools_by_id[cid]
            members = matching.schools[cid]
            held_minorities = [x for x in members if x in market.minority_ids]
            held_majorities = [x for x in members if x in market.majority_ids]
            acceptable = sid in school.priority
            clause = None
            if len(members) < school.capacity and acceptable:
                clause = "vacancy"
            if clause is None and acceptable:
                if not student.is_majority:
                    if len(held_minorities) < reserve[cid]:
                        clause = "reserve"
                    elif any(_outranks(school, sid, x) for x in members):
                        clause = "i"
                elif len(held_minorities) > reserve[cid]:
                    if any(_outranks(school, sid, x) for x in members):
                        clause = "ii"
                elif any(_outranks(school, sid, x) for x in held_majorities):
                    clause = "iii"
            if clause is not None:
                out.append(BlockingPair(sid, cid, clause))
    return out


def is_individually_rational(market: Market, matching: Matching) -> bool:
    """Every matched student finds her school acceptable and vice versa."""
    for sid, cid in matching.students.items():
        if cid is None:
            continue
        if cid not in market.students_by_id[sid].prefs:
            return False
        if sid not in market.schools_by_id[cid].priority:
            return False
    return True


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _resolve_policy(market: Market, policy: Policy | None, expected_kind: str) -> Policy:
    policy = policy if policy is not None else market.policy
    if policy.kind != expected_kind:
        raise PolicyMismatchError(
            f"policy mismatch: expected {expected_kind!r}, got {policy.kind!r}")
    return market.with_policy(policy).policy  # normalized over all schools


def _limit_vector(im: IndexedMarket, policy: Policy) -> np.ndarray:
    return np.array([policy.values[cid] for cid in im.school_ids], dtype=np.int64)


def _materialize(market: Market, im: IndexedMarket, res: _engine.RunResult) -> MechanismOutput:
    matching = _matching_from_result(market, im, res)
    trace = None
    if res.trace is not None:
        rounds = []
        for i, rec in enumerate(res.trace, start=1):
            rounds.append(TraceRound(
                index=i,
                applications=tuple((im.student_ids[s], im.school_ids[c])
                                   for s, c in rec.applications),
                held={im.school_ids[c]: frozenset(im.student_ids[s] for s in hs)
                      for c, hs in enumerate(rec.held)},
                rejected={im.school_ids[c]: frozenset(im.student_ids[s] for s in ss)
                          for c, ss in rec.rejected.items()},
            ))
        trace = RoundTrace(tuple(rounds))
    return MechanismOutput(matching, trace, res.rounds)


def _matching_from_result(market: Market, im: IndexedMarket, res: _engine.RunResult) -> Matching:
    assignment = {im.student_ids[s]: (im.school_ids[c] if c is not None else None)
                  for s, c in enumerate(res.student_of)}
    return Matching.from_student_assignment(market, assignment)


def _require_structural_feasibility(market: Market, matching: Matching) -> None:
    from .market import validate_matching

    report = validate_matching(market, Policy.none(), matching)
    if not report.ok:
        raise MarketError("infeasible matching: " + report.violations[0].message)


def _preferred_schools(market: Market, student, assigned: str | None) -> list[str]:
    """Schools the student strictly prefers to her current assignment.

    An assignment outside the preference list counts as worse than unmatched,
    so every listed school is preferred to it.
    """
    if assigned is None or assigned not in student.prefs:
        return list(student.prefs)
    cut = student.prefs.index(assigned)
    return list(student.prefs[:cut])


def _outranks(school, sid: str, other: str) -> bool:
    """True when ``sid`` has strictly higher priority at ``school`` than
    ``other``; any listed student outranks any unlisted one."""
    try:
        a = school.priority.index(sid)
    except ValueError:
        return False
    try:
        b = school.priority.index(other)
    except ValueError:
        return True
    return a < b
