"""Effective-competition test and quota/reserve outcome comparison.

A market is effectively competitive when every school with reserved seats is
ranked first by at least as many minority students as it has reserved seats.
``check_equivalence`` runs both mechanisms under counterpart policies
(reserve + quota = capacity) on the same market and reports whether the
matchings, and the round-by-round tentative acceptance sets, coincide.

``split_school_quota`` / ``split_school_reserve`` expose the sub-school
decomposition that explains the comparison: each policy acts like splitting a
school into one sub-school with the original priorities and one whose
priorities are rewritten (majorities unacceptable under a quota; minorities
lifted above majorities under a reserve). Preferences over sub-schools are
not defined, so these are analysis objects, not runnable markets.
"""
from __future__ import annotations

from dataclasses import dataclass

from .market import Market, MarketError, Policy, POLICY_NONE, POLICY_QUOTA, POLICY_RESERVE
from .mechanisms import MechanismOutput, run_sosm_q, run_sosm_r


@dataclass(frozen=True)
class SchoolCompetition:
    school: str
    reserve: int
    first_choice_minorities: frozenset[str]

    @property
    def satisfied(self) -> bool:
        return len(self.first_choice_minorities) >= self.reserve


@dataclass(frozen=True)
class EffectiveCompetitionReport:
    """Per-school competition entries for schools with a positive reserve."""

    entries: tuple[SchoolCompetition, ...]

    @property
    def verdict(self) -> bool:
        return all(e.satisfied for e in self.entries)

    def to_json_dict(self) -> dict:
        return {
            "effectively_competitive": self.verdict,
            "schools": [
                {
                    "school": e.school,
                    "reserve": e.reserve,
                    "first_choice_minorities": sorted(e.first_choice_minorities),
                    "satisfied": e.satisfied,
                }
                for e in self.entries
            ],
        }


def effectively_competitive(market: Market, policy: Policy | None = None) -> EffectiveCompetitionReport:
    """Evaluate effective competition for the market under ``policy``.

    Either policy tag is accepted; a quota is converted to its reserve
    counterpart (reserve = capacity - quota). Only first choices count:
    a school with reserve r needs at least r minority students ranking it
    first. Schools with zero reserve are excluded, so a market without
    reserved seats is vacuously competitive.
    """
    reserve = _reserve_values(market, policy)
    first_choice: dict[str, set[str]] = {cid: set() for cid in market.school_ids}
    for s in market.students:
        if not s.is_majority and s.prefs:
            first_choice[s.prefs[0]].add(s.id)
    entries = tuple(
        SchoolCompetition(cid, reserve[cid], frozenset(first_choice[cid]))
        for cid in market.school_ids
        if reserve[cid] > 0
    )
    return EffectiveCompetitionReport(entries)


@dataclass(frozen=True)
class SubSchool:
    parent: str
    kind: str  # "original" | "quota" | "unaffected" | "reserve"
    capacity: int
    priority: tuple[str, ...]


def split_school_quota(market: Market, school_id: str, majority_cap: int) -> tuple[SubSchool, SubSchool]:
    """Split a school under a majority quota into (original, quota) sub-schools.

    The original keeps the unmodified priority order with capacity equal to
    the quota; the quota sub-school takes the remaining seats, preserves the
    priority order restricted to minorities, and deems every majority student
    unacceptable.
    """
    school = market.schools_by_id[school_id]
    if not 0 <= majority_cap <= school.capacity:
        raise MarketError(
            f"school {school_id!r}: quota out of range ({majority_cap} not in 0..{school.capacity})")
    minorities_only = tuple(sid for sid in school.priority if sid in market.minority_ids)
    return (
        SubSchool(school_id, "original", majority_cap, school.priority),
        SubSchool(school_id, "quota", school.capacity - majority_cap, minorities_only),
    )


def split_school_reserve(market: Market, school_id: str, reserve: int) -> tuple[SubSchool, SubSchool]:
    """Split a school under a minority reserve into (unaffected, reserve)
    sub-schools.

    The unaffected part keeps the unmodified priority order with the
    non-reserved seats; the reserve part ranks every minority above every
    majority while preserving the within-group order.
    """
    school = market.schools_by_id[school_id]
    if not 0 <= reserve <= school.capacity:
        raise MarketError(
            f"school {school_id!r}: reserve out of range ({reserve} not in 0..{school.capacity})")
    minorities = tuple(sid for sid in school.priority if sid in market.minority_ids)
    majorities = tuple(sid for sid in school.priority if sid in market.majority_ids)
    return (
        SubSchool(school_id, "unaffected", school.capacity - reserve, school.priority),
        SubSchool(school_id, "reserve", reserve, minorities + majorities),
    )


@dataclass(frozen=True)
class PolicyComparison:
    """Outcome of running counterpart quota and reserve policies side by side."""

    ec: EffectiveCompetitionReport
    quota_output: MechanismOutput
    reserve_output: MechanismOutput
    matchings_equal: bool
    trace_equal: bool

    @property
    def ec_verdict(self) -> bool:
        return self.ec.verdict

    @property
    def consistent(self) -> bool:
        """Effective competition must imply equal matchings."""
        return (not self.ec.verdict) or self.matchings_equal

    def to_json_dict(self) -> dict:
        return {
            "ec_verdict": self.ec_verdict,
            "matchings_equal": self.matchings_equal,
            "trace_equal": self.trace_equal,
            "consistent": self.consistent,
            "effective_competition": self.ec.to_json_dict(),
        }


def check_equivalence(market: Market, policy: Policy | None = None,
                      *, record_trace: bool = True) -> PolicyComparison:
    """Run the quota mechanism and its reserve counterpart on one market.

    The counterpart is always derived from the single given policy via
    reserve = capacity - quota, so mismatched pairs cannot be passed. The
    comparison covers the final matchings and, when traces are recorded, the
    per-round tentative acceptance sets.
    """
    reserve = _reserve_values(market, policy)
    caps = market.capacities()
    quota_policy = Policy.majority_quota({cid: caps[cid] - reserve[cid] for cid in caps})
    reserve_policy = Policy.minority_reserve(reserve)
    ec = effectively_competitive(market, reserve_policy)
    out_q = run_sosm_q(market, policy=quota_policy, record_trace=record_trace)
    out_r = run_sosm_r(market, policy=reserve_policy, record_trace=record_trace)
    matchings_equal = out_q.matching == out_r.matching
    if out_q.trace is not None and out_r.trace is not None:
        trace_equal = out_q.trace.held_history() == out_r.trace.held_history()
    else:
        trace_equal = matchings_equal and out_q.rounds == out_r.rounds
    return PolicyComparison(ec, out_q, out_r, matchings_equal, trace_equal)


def _reserve_values(market: Market, policy: Policy | None) -> dict[str, int]:
    policy = policy if policy is not None else market.policy
    normalized = market.with_policy(policy)
    if policy.kind == POLICY_NONE:
        return {cid: 0 for cid in market.school_ids}
    if policy.kind in (POLICY_QUOTA, POLICY_RESERVE):
        return normalized.reserve_vector()
    raise MarketError(f"unsupported policy kind {policy.kind!r}")
