"""Domain model for school-choice markets: students, schools, policies, matchings.

A market pairs a set of typed students (majority/minority) holding strict
preference lists over schools with a set of capacitated schools holding strict
priority lists over students, plus one affirmative-action policy. Omission
from a preference or priority list means "unacceptable"; there is no explicit
empty-seat token. All objects are immutable after construction and safe to
share across workers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Literal, Mapping

MAJORITY = "majority"
MINORITY = "minority"

StudentType = Literal["majority", "minority"]
PolicyKind = Literal["none", "majority_quota", "minority_reserve"]

POLICY_NONE = "none"
POLICY_QUOTA = "majority_quota"
POLICY_RESERVE = "minority_reserve"


class MarketError(ValueError):
    """Raised on malformed market files or inconsistent market data."""


@dataclass(frozen=True)
class Student:
    id: str
    type: StudentType
    prefs: tuple[str, ...]  # most-preferred first; unlisted schools are unacceptable

    @property
    def is_majority(self) -> bool:
        return self.type == MAJORITY


@dataclass(frozen=True)
class School:
    id: str
    capacity: int
    priority: tuple[str, ...]  # highest priority first; unlisted students are unacceptable


@dataclass(frozen=True)
class Policy:
    """One affirmative-action policy: none, per-school majority quotas, or
    per-school minority reserves.

    ``values`` maps school id to the quota (cap on admitted majority students)
    or to the reserve (seats at which minorities take precedence). Schools
    missing from the map get the neutral default: quota = capacity, reserve = 0.
    """

    kind: PolicyKind
    values: dict[str, int] = field(default_factory=dict)

    @staticmethod
    def none() -> "Policy":
        return Policy(POLICY_NONE, {})

    @staticmethod
    def majority_quota(values: Mapping[str, int]) -> "Policy":
        return Policy(POLICY_QUOTA, dict(values))

    @staticmethod
    def minority_reserve(values: Mapping[str, int]) -> "Policy":
        return Policy(POLICY_RESERVE, dict(values))


@dataclass(frozen=True)
class Market:
    """A validated school-choice market.

    Construction checks all cross-references and policy bounds and normalizes
    the policy value map to cover every school. Iteration order over ids is
    lexicographic for reproducibility.
    """

    students: tuple[Student, ...]
    schools: tuple[School, ...]
    policy: Policy = field(default_factory=Policy.none)

    def __post_init__(self) -> None:
        if not self.students:
            raise MarketError("empty student set")
        seen: set[str] = set()
        for s in self.students:
            if s.id in seen:
                raise MarketError(f"duplicate student id {s.id!r}")
            seen.add(s.id)
            if s.type not in (MAJORITY, MINORITY):
                raise MarketError(f"student {s.id!r}: unknown type {s.type!r}")
        school_ids: set[str] = set()
        for c in self.schools:
            if c.id in school_ids:
                raise MarketError(f"duplicate school id {c.id!r}")
            if c.id in seen:
                raise MarketError(f"id {c.id!r} used for both a student and a school")
            school_ids.add(c.id)
            if c.capacity < 1:
                raise MarketError(f"school {c.id!r}: capacity must be >= 1, got {c.capacity}")
        for s in self.students:
            if len(set(s.prefs)) != len(s.prefs):
                raise MarketError(f"student {s.id!r}: duplicate school in preference list")
            for cid in s.prefs:
                if cid not in school_ids:
                    raise MarketError(f"student {s.id!r}: unknown school id {cid!r} in preferences")
        for c in self.schools:
            if len(set(c.priority)) != len(c.priority):
                raise MarketError(f"school {c.id!r}: duplicate student in priority list")
            for sid in c.priority:
                if sid not in seen:
                    raise MarketError(f"school {c.id!r}: unknown student id {sid!r} in priority list")
        object.__setattr__(self, "policy", self._normalized_policy(self.policy))

    def _normalized_policy(self, policy: Policy) -> Policy:
        caps = {c.id: c.capacity for c in self.schools}
        for cid in policy.values:
            if cid not in caps:
                raise MarketError(f"policy: unknown school id {cid!r}")
        if policy.kind == POLICY_NONE:
            if policy.values:
                raise MarketError("policy: kind 'none' takes no values")
            return Policy(POLICY_NONE, {})
        full: dict[str, int] = {}
        for cid in sorted(caps):
            default = caps[cid] if policy.kind == POLICY_QUOTA else 0
            v = policy.values.get(cid, default)
            if not isinstance(v, int) or isinstance(v, bool):
                raise MarketError(f"policy: value for school {cid!r} must be an integer")
            if v < 0:
                raise MarketError(f"policy: value for school {cid!r} must be >= 0, got {v}")
            if v > caps[cid]:
                label = "quota" if policy.kind == POLICY_QUOTA else "reserve"
                raise MarketError(
                    f"school {cid!r}: {label} exceeds capacity ({v} > {caps[cid]})"
                )
            full[cid] = v
        return Policy(policy.kind, full)

    @cached_property
    def students_by_id(self) -> dict[str, Student]:
        return {s.id: s for s in self.students}

    @cached_property
    def schools_by_id(self) -> dict[str, School]:
        return {c.id: c for c in self.schools}

    @cached_property
    def student_ids(self) -> tuple[str, ...]:
        return tuple(sorted(s.id for s in self.students))

    @cached_property
    def school_ids(self) -> tuple[str, ...]:
        return tuple(sorted(c.id for c in self.schools))

    @cached_property
    def minority_ids(self) -> frozenset[str]:
        return frozenset(s.id for s in self.students if s.type == MINORITY)

    @cached_property
    def majority_ids(self) -> frozenset[str]:
        return frozenset(s.id for s in self.students if s.type == MAJORITY)

    def capacities(self) -> dict[str, int]:
        return {c.id: c.capacity for c in self.schools}

    def quota_vector(self) -> dict[str, int]:
        """Per-school majority quota implied by the market's policy."""
        caps = self.capacities()
        if self.policy.kind == POLICY_QUOTA:
            return dict(self.policy.values)
        if self.policy.kind == POLICY_RESERVE:
            return {cid: caps[cid] - self.policy.values[cid] for cid in caps}
        return caps

    def reserve_vector(self) -> dict[str, int]:
        """Per-school minority reserve implied by the market's policy.

        Counterpart policies are linked by reserve + quota = capacity.
        """
        caps = self.capacities()
        if self.policy.kind == POLICY_RESERVE:
            return dict(self.policy.values)
        if self.policy.kind == POLICY_QUOTA:
            return {cid: caps[cid] - self.policy.values[cid] for cid in caps}
        return {cid: 0 for cid in caps}

    def with_policy(self, policy: Policy) -> "Market":
        return replace(self, policy=policy)


def convert_policy(policy: Policy, capacities: Mapping[str, int]) -> Policy:
    """Convert a quota policy to its reserve counterpart or back.

    Uses reserve + quota = capacity per school, so the conversion is an
    involution. A 'none' policy converts to the all-zero reserve.
    """
    if policy.kind == POLICY_NONE:
        return Policy.minority_reserve({cid: 0 for cid in capacities})
    missing = [cid for cid in policy.values if cid not in capacities]
    if missing:
        raise MarketError(f"policy: unknown school id {missing[0]!r}")
    values = {cid: capacities[cid] - policy.values.get(cid, _default(policy.kind, capacities[cid]))
              for cid in capacities}
    kind = POLICY_RESERVE if policy.kind == POLICY_QUOTA else POLICY_QUOTA
    return Policy(kind, values)


def _default(kind: str, capacity: int) -> int:
    return capacity if kind == POLICY_QUOTA else 0


@dataclass(frozen=True)
class Matching:
    """An assignment of students to schools (or to themselves, i.e. unmatched).

    Both sides are stored and kept bidirectionally consistent: student ->
    school id or None, and school -> frozen set of student ids (every school
    appears, possibly with an empty set).
    """

    students: dict[str, str | None]
    schools: dict[str, frozenset[str]]

    @staticmethod
    def from_student_assignment(market: Market, assignment: Mapping[str, str | None]) -> "Matching":
        """Build a matching from the student side; omitted students are unmatched."""
        for sid in assignment:
            if sid not in market.students_by_id:
                raise MarketError(f"matching: unknown student id {sid!r}")
        students: dict[str, str | None] = {}
        schools: dict[str, set[str]] = {cid: set() for cid in market.school_ids}
        for sid in market.student_ids:
            cid = assignment.get(sid)
            if cid is not None and cid not in market.schools_by_id:
                raise MarketError(f"matching: unknown school id {cid!r} for student {sid!r}")
            students[sid] = cid
            if cid is not None:
                schools[cid].add(sid)
        return Matching(students, {cid: frozenset(v) for cid, v in schools.items()})

    def assigned(self, school_id: str) -> frozenset[str]:
        return self.schools[school_id]

    def to_json_dict(self) -> dict:
        return {"assignment": {sid: self.students[sid] for sid in sorted(self.students)}}


@dataclass(frozen=True)
class TraceRound:
    """One proposal round: who applied where, and each school's tentative and
    rejected sets after the round resolved."""

    index: int
    applications: tuple[tuple[str, str], ...]  # (student, school), sorted
    held: dict[str, frozenset[str]]            # snapshot over all schools
    rejected: dict[str, frozenset[str]]        # only schools that rejected someone


@dataclass(frozen=True)
class RoundTrace:
    rounds: tuple[TraceRound, ...]

    def held_history(self) -> tuple[dict[str, frozenset[str]], ...]:
        return tuple(r.held for r in self.rounds)


@dataclass(frozen=True)
class Violation:
    kind: str       # "consistency" | "capacity" | "majority_cap"
    subject: str    # offending school or student id
    message: str


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_matching(market: Market, policy: Policy, matching: Matching) -> FeasibilityReport:
    """Check a matching against the feasibility conditions.

    Reports (rather than raises) every violated condition: bidirectional
    consistency, school capacity, and the per-school cap on majority students
    when the policy is a majority quota. An empty report means feasible; an
    all-unmatched matching is feasible.
    """
    for sid in matching.students:
        if sid not in market.students_by_id:
            raise MarketError(f"matching: unknown student id {sid!r}")
    for cid in matching.schools:
        if cid not in market.schools_by_id:
            raise MarketError(f"matching: unknown school id {cid!r}")
    out: list[Violation] = []
    for sid in market.student_ids:
        cid = matching.students.get(sid)
        if cid is not None and sid not in matching.schools.get(cid, frozenset()):
            out.append(Violation("consistency", sid,
                                 f"student {sid!r} assigned to {cid!r} but absent from its set"))
    for cid in market.school_ids:
        members = matching.schools.get(cid, frozenset())
        for sid in members:
            if matching.students.get(sid) != cid:
                out.append(Violation("consistency", cid,
                                     f"school {cid!r} lists {sid!r} who is not assigned to it"))
        cap = market.schools_by_id[cid].capacity
        if len(members) > cap:
            out.append(Violation("capacity", cid,
                                 f"school {cid!r} holds {len(members)} students, capacity {cap}"))
    if policy.kind == POLICY_QUOTA:
        norm = market.with_policy(policy).policy  # validates and fills defaults
        for cid in market.school_ids:
            majorities = sum(1 for sid in matching.schools.get(cid, frozenset())
                             if sid in market.majority_ids)
            if majorities > norm.values[cid]:
                out.append(Violation("majority_cap", cid,
                                     f"school {cid!r} holds {majorities} majority students, "
                                     f"quota {norm.values[cid]}"))
    return FeasibilityReport(tuple(out))


# ---------------------------------------------------------------------------
# Market file format (JSON)
# ---------------------------------------------------------------------------

def parse_market(text: str) -> Market:
    """Parse a UTF-8 JSON market document.

    Top-level keys: "students" (id, type, prefs), "schools" (id, capacity,
    priority) and "policy" (kind, values). Errors carry the offending
    location or id.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MarketError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise MarketError("top-level value must be an object")
    for key in ("students", "schools", "policy"):
        if key not in doc:
            raise MarketError(f"missing required field {key!r}")

    students = []
    for i, entry in enumerate(_expect_list(doc["students"], "students")):
        loc = f"students[{i}]"
        students.append(Student(
            id=_expect_str(entry, "id", loc),
            type=_expect_choice(entry, "type", (MAJORITY, MINORITY), loc),
            prefs=tuple(_expect_str_list(entry, "prefs", loc)),
        ))
    schools = []
    for i, entry in enumerate(_expect_list(doc["schools"], "schools")):
        loc = f"schools[{i}]"
        capacity = entry.get("capacity")
        if not isinstance(capacity, int) or isinstance(capacity, bool):
            raise MarketError(f"{loc}: missing or non-integer field 'capacity'")
        schools.append(School(
            id=_expect_str(entry, "id", loc),
            capacity=capacity,
            priority=tuple(_expect_str_list(entry, "priority", loc)),
        ))
    pol = doc["policy"]
    if not isinstance(pol, dict):
        raise MarketError("policy: must be an object")
    kind = pol.get("kind")
    if kind not in (POLICY_NONE, POLICY_QUOTA, POLICY_RESERVE):
        raise MarketError(f"policy: unknown kind {kind!r}")
    values = pol.get("values", {})
    if not isinstance(values, dict):
        raise MarketError("policy.values: must be an object")
    return Market(tuple(students), tuple(schools), Policy(kind, dict(values)))


def market_to_json(market: Market) -> str:
    """Serialize a market; parse(serialize(m)) == m."""
    doc = {
        "students": [
            {"id": s.id, "type": s.type, "prefs": list(s.prefs)} for s in market.students
        ],
        "schools": [
            {"id": c.id, "capacity": c.capacity, "priority": list(c.priority)}
            for c in market.schools
        ],
        "policy": {
            "kind": market.policy.kind,
            "values": {cid: market.policy.values[cid] for cid in sorted(market.policy.values)},
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_matching(text: str, market: Market) -> Matching:
    """Parse a matching file: {"assignment": {student id: school id or null}}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MarketError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict) or "assignment" not in doc:
        raise MarketError("missing required field 'assignment'")
    assignment = doc["assignment"]
    if not isinstance(assignment, dict):
        raise MarketError("'assignment' must be an object")
    return Matching.from_student_assignment(market, assignment)


def matching_to_json(matching: Matching) -> str:
    return json.dumps(matching.to_json_dict(), indent=2) + "\n"


def _expect_list(value, name: str) -> list:
    if not isinstance(value, list):
        raise MarketError(f"{name}: must be an array")
    return value


def _expect_str(entry, key: str, loc: str) -> str:
    if not isinstance(entry, dict) or key not in entry or not isinstance(entry[key], str):
        raise MarketError(f"{loc}: missing or non-string field {key!r}")
    return entry[key]


def _expect_choice(entry, key: str, choices: Iterable[str], loc: str) -> str:
    v = _expect_str(entry, key, loc)
    if v not in choices:
        raise MarketError(f"{loc}: field {key!r} must be one of {sorted(choices)}, got {v!r}")
    return v


def _expect_str_list(entry, key: str, loc: str) -> list[str]:
    if key not in entry:
        raise MarketError(f"{loc}: missing required field {key!r}")
    v = entry[key]
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise MarketError(f"{loc}: field {key!r} must be an array of ids")
    return v
