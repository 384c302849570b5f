"""Index-level deferred-acceptance engine.

Public modules convert string-id markets into this compact form once and run
the proposal loops here. School choice is re-solved from scratch over
(held union new applicants) each time, which makes every acceptance rule
idempotent and keeps batch and sequential execution outcome-equivalent.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

UNRANKED = np.iinfo(np.int32).max

MODE_PLAIN = "plain"
MODE_QUOTA = "quota"
MODE_RESERVE = "reserve"


@dataclass
class IndexedMarket:
    student_ids: tuple[str, ...]   # sorted; index = position
    school_ids: tuple[str, ...]    # sorted; index = position
    is_majority: np.ndarray        # bool per student
    prefs: list[list[int]]         # per student, school indices, best first
    rank: np.ndarray               # (n_schools, n_students) int32; UNRANKED = unacceptable
    capacity: np.ndarray           # int per school

    @property
    def n_students(self) -> int:
        return len(self.student_ids)

    @property
    def n_schools(self) -> int:
        return len(self.school_ids)

    @classmethod
    def from_market(cls, market) -> "IndexedMarket":
        student_ids = market.student_ids
        school_ids = market.school_ids
        sidx = {sid: i for i, sid in enumerate(student_ids)}
        cidx = {cid: i for i, cid in enumerate(school_ids)}
        m, n = len(student_ids), len(school_ids)
        is_majority = np.zeros(m, dtype=bool)
        prefs: list[list[int]] = [[] for _ in range(m)]
        for sid in student_ids:
            s = market.students_by_id[sid]
            i = sidx[sid]
            is_majority[i] = s.is_majority
            prefs[i] = [cidx[c] for c in s.prefs]
        rank = np.full((n, m), UNRANKED, dtype=np.int32)
        capacity = np.zeros(n, dtype=np.int64)
        for cid in school_ids:
            c = market.schools_by_id[cid]
            j = cidx[cid]
            capacity[j] = c.capacity
            for r, sid in enumerate(c.priority):
                rank[j, sidx[sid]] = r
        return cls(tuple(student_ids), tuple(school_ids), is_majority, prefs, rank, capacity)


@dataclass
class RoundRecord:
    """Index-level trace of one batch round."""

    applications: list[tuple[int, int]]        # (student, school)
    held: list[tuple[int, ...]]                # snapshot per school, sorted indices
    rejected: dict[int, tuple[int, ...]]       # school -> rejected students this round


@dataclass
class RunResult:
    student_of: list[int | None]               # per student, school index or None
    held: list[list[int]]                      # per school, priority-sorted hold list
    rounds: int
    trace: list[RoundRecord] | None = None
    applications: int = 0                      # proposals processed (sequential/stochastic runs)


def choose_plain(cands: Sequence[int], rank_row: np.ndarray, cap: int) -> list[int]:
    """Top-capacity acceptable candidates by priority."""
    acc = sorted((s for s in cands if rank_row[s] != UNRANKED), key=rank_row.__getitem__)
    return acc[:cap]


def choose_quota(cands: Sequence[int], rank_row: np.ndarray, cap: int,
                 majority_cap: int, is_majority: np.ndarray) -> list[int]:
    """Walk candidates by priority, skipping majority students once the
    majority quota is reached, until capacity is filled."""
    acc = sorted((s for s in cands if rank_row[s] != UNRANKED), key=rank_row.__getitem__)
    held: list[int] = []
    majorities = 0
    for s in acc:
        if len(held) == cap:
            break
        if is_majority[s]:
            if majorities < majority_cap:
                held.append(s)
                majorities += 1
        else:
            held.append(s)
    return held


def choose_reserve(cands: Sequence[int], rank_row: np.ndarray, cap: int,
                   reserve: int, is_majority: np.ndarray) -> list[int]:
    """Fill up to ``reserve`` seats with the highest-priority minority
    candidates, then fill remaining seats from everyone left by priority."""
    acc = sorted((s for s in cands if rank_row[s] != UNRANKED), key=rank_row.__getitem__)
    protected = [s for s in acc if not is_majority[s]][:min(reserve, cap)]
    taken = set(protected)
    held = list(protected)
    for s in acc:
        if len(held) == cap:
            break
        if s not in taken:
            held.append(s)
    return sorted(held, key=rank_row.__getitem__)


def school_choice(im: IndexedMarket, mode: str, limits: np.ndarray,
                  school: int, cands: Sequence[int]) -> list[int]:
    rank_row = im.rank[school]
    cap = int(im.capacity[school])
    if mode == MODE_PLAIN:
        return choose_plain(cands, rank_row, cap)
    if mode == MODE_QUOTA:
        return choose_quota(cands, rank_row, cap, int(limits[school]), im.is_majority)
    if mode == MODE_RESERVE:
        return choose_reserve(cands, rank_row, cap, int(limits[school]), im.is_majority)
    raise ValueError(f"unknown mode {mode!r}")


def run_batch(im: IndexedMarket, mode: str, limits: np.ndarray | None = None,
              record_trace: bool = False) -> RunResult:
    """Batch student-proposing deferred acceptance.

    Every currently rejected student applies to her next choice each round;
    schools re-solve their choice over held plus new applicants. Terminates
    once no student has a school left to try.
    """
    m = im.n_students
    if limits is None:
        limits = np.zeros(im.n_schools, dtype=np.int64)
    ptr = [0] * m
    held: list[list[int]] = [[] for _ in range(im.n_schools)]
    active = [s for s in range(m) if im.prefs[s]]
    rounds = 0
    applications = 0
    trace: list[RoundRecord] | None = [] if record_trace else None
    while active:
        rounds += 1
        apps: dict[int, list[int]] = defaultdict(list)
        for s in active:
            apps[im.prefs[s][ptr[s]]].append(s)
        applications += len(active)
        next_active: list[int] = []
        rejected_by: dict[int, tuple[int, ...]] = {}
        for c in sorted(apps):
            cands = held[c] + apps[c]
            new_held = school_choice(im, mode, limits, c, cands)
            rejected = sorted(set(cands) - set(new_held))
            held[c] = new_held
            if rejected:
                rejected_by[c] = tuple(rejected)
                for s in rejected:
                    ptr[s] += 1
                    if ptr[s] < len(im.prefs[s]):
                        next_active.append(s)
        if trace is not None:
            trace.append(RoundRecord(
                applications=sorted((s, c) for c, ss in apps.items() for s in ss),
                held=[tuple(sorted(h)) for h in held],
                rejected=rejected_by,
            ))
        active = sorted(next_active)
    student_of: list[int | None] = [None] * m
    for c, hs in enumerate(held):
        for s in hs:
            student_of[s] = c
    return RunResult(student_of, held, rounds, trace, applications)


def run_sequential(im: IndexedMarket, mode: str, limits: np.ndarray | None = None,
                   order: Sequence[int] | None = None) -> RunResult:
    """Sequential deferred acceptance: introduce students one at a time and
    follow each rejection chain depth-first until it settles.

    The outcome is independent of ``order`` because tentative acceptance is
    re-solved from the same choice rules; this runner exists to exercise that
    property and to mirror the stochastic engine's control flow.
    """
    m = im.n_students
    if limits is None:
        limits = np.zeros(im.n_schools, dtype=np.int64)
    if order is None:
        order = range(m)
    ptr = [0] * m
    held: list[list[int]] = [[] for _ in range(im.n_schools)]
    applications = 0
    for s0 in order:
        s: int | None = s0
        while s is not None:
            if ptr[s] >= len(im.prefs[s]):
                break  # exhausted: permanently unmatched
            c = im.prefs[s][ptr[s]]
            applications += 1
            new_held = school_choice(im, mode, limits, c, held[c] + [s])
            if s not in new_held:
                ptr[s] += 1
                continue
            evicted = [x for x in held[c] if x not in new_held]
            held[c] = new_held
            if evicted:
                e = evicted[0]
                ptr[e] += 1
                s = e
            else:
                s = None
    student_of: list[int | None] = [None] * m
    for c, hs in enumerate(held):
        for s_ in hs:
            student_of[s_] = c
    return RunResult(student_of, held, rounds=applications, applications=applications)
