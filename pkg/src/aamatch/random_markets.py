"""Random school-choice markets drawn from per-type school popularity weights.

Each student's preference list is k schools sampled sequentially without
replacement, each draw proportional to the remaining weights (majority
students draw from the alpha vector, minorities from beta). School priorities
are independent uniform permutations of all students. Reserved seats are
placed one per school on a configurable subset, and majority weights are
zeroed on schools whose entire capacity is reserved so no majority student
ever lists them.

Randomness flows through an explicit numpy Generator (PCG64 seeded via
SeedSequence), so a given seed reproduces a market byte for byte within this
implementation; across implementations of the same sampling scheme only the
distribution is shared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._engine import IndexedMarket
from .market import Market, MarketError, Policy, School, Student, MAJORITY, MINORITY

PLACEMENT_UNIFORM = "uniform"
PLACEMENT_WEIGHTED = "weighted"
PLACEMENT_FIXED = "fixed"


@dataclass(frozen=True)
class RegularityConstants:
    """Constants bounding a sequence of random markets.

    a: growth exponent for reserved seats (strictly below one half);
    lam: student count per school; kappa: required excess seats per school;
    theta: reserved-seat scale; r: max popularity ratio between schools;
    k: preference length cap; q_bar: capacity cap.
    """

    a: float = 0.25
    lam: float = 0.5
    kappa: float = 3.0
    theta: float = 1.0
    r: float = 1.0
    k: int = 5
    q_bar: int = 4

    def __post_init__(self) -> None:
        if not 0.0 <= self.a < 0.5:
            raise ValueError(f"a must lie in [0, 0.5), got {self.a}")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.k < 1 or self.q_bar < 1:
            raise ValueError("k and q_bar must be positive integers")

    def reserved_seat_bound(self, n: int) -> int:
        """Upper bound on reserved seats in a market with n schools,
        recomputed from (theta, a, n) every call."""
        return int(math.ceil(self.theta * n ** self.a - 1e-12))


@dataclass(frozen=True)
class SchoolWeights:
    """Per-school popularity weights: alpha for majorities, beta for
    minorities. Both vectors are normalized to sum to one; every beta entry
    is positive, while alpha entries may be zero (fully reserved schools)."""

    majority: tuple[float, ...]
    minority: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.majority) != len(self.minority):
            raise ValueError("weight vectors must have equal length")
        if any(b <= 0 for b in self.minority):
            raise ValueError("minority weights must all be positive")
        if any(a < 0 for a in self.majority):
            raise ValueError("majority weights must be non-negative")
        for name, vec in (("majority", self.majority), ("minority", self.minority)):
            if abs(sum(vec) - 1.0) > 1e-9:
                raise ValueError(f"{name} weights must sum to 1")

    @staticmethod
    def uniform(n: int) -> "SchoolWeights":
        w = tuple([1.0 / n] * n)
        return SchoolWeights(w, w)

    @staticmethod
    def ratio_bounded(n: int, ratio: float, rng: np.random.Generator) -> "SchoolWeights":
        """Raw weights uniform on [1/ratio, 1], then normalized; the max/min
        ratio within each vector is at most ``ratio`` by construction."""
        if ratio < 1:
            raise ValueError("ratio must be >= 1")
        raws = []
        for _ in range(2):
            raw = rng.uniform(1.0 / ratio, 1.0, size=n)
            raws.append(tuple((raw / raw.sum()).tolist()))
        return SchoolWeights(raws[0], raws[1])


@dataclass(frozen=True)
class RandomMarketParams:
    """Knobs for one random market draw."""

    n_schools: int
    n_students: int
    pref_length: int
    capacity: int = 1
    majority_share: float = 0.5
    n_reserved_seats: int = 0
    reserve_placement: str = PLACEMENT_UNIFORM
    reserve_schools: tuple[int, ...] | None = None  # school indices, placement "fixed"
    weight_ratio: float = 1.0
    weights: SchoolWeights | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_schools < 1 or self.n_students < 1:
            raise ValueError("n_schools and n_students must be positive")
        if not 0.0 < self.majority_share < 1.0:
            raise ValueError("majority_share must lie in (0, 1)")
        if not 1 <= self.pref_length <= self.n_schools:
            raise ValueError("pref_length must lie in 1..n_schools")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.n_reserved_seats < 0 or self.n_reserved_seats > self.n_schools * self.capacity:
            raise ValueError("n_reserved_seats must lie in 0..total seats")
        if self.reserve_placement not in (PLACEMENT_UNIFORM, PLACEMENT_WEIGHTED, PLACEMENT_FIXED):
            raise ValueError(f"unknown reserve placement {self.reserve_placement!r}")
        if self.reserve_placement != PLACEMENT_FIXED and self.n_reserved_seats > self.n_schools:
            raise ValueError("single-seat placement needs n_reserved_seats <= n_schools")
        if self.reserve_placement == PLACEMENT_FIXED:
            if self.reserve_schools is None:
                raise ValueError("fixed placement requires reserve_schools")
            if len(self.reserve_schools) != self.n_reserved_seats:
                raise ValueError("reserve_schools length must equal n_reserved_seats")
            bad = [c for c in self.reserve_schools if not 0 <= c < self.n_schools]
            if bad:
                raise ValueError(f"reserve school index out of range: {bad[0]}")
        if self.weight_ratio < 1:
            raise ValueError("weight_ratio must be >= 1")
        if self.weights is not None and len(self.weights.minority) != self.n_schools:
            raise ValueError("explicit weights must cover every school")

    @classmethod
    def from_constants(cls, constants: RegularityConstants, n: int, *,
                       majority_share: float = 0.5, seed: int = 0) -> "RandomMarketParams":
        """Instantiate the market of size n in a regular sequence: lam*n
        students, constant capacity q_bar, ceil(theta * n^a) reserved seats."""
        n_students = int(math.floor(constants.lam * n))
        if n_students < 1:
            raise ValueError(f"lam * n must be >= 1, got {constants.lam * n}")
        if constants.k > n:
            raise ValueError(f"preference length {constants.k} exceeds school count {n}")
        if n * constants.q_bar - n_students < constants.kappa * n:
            raise ValueError(
                "constants violate excess capacity: need q_bar*n - lam*n >= kappa*n")
        n_reserved = constants.reserved_seat_bound(n)
        if n_reserved > n:
            raise ValueError("reserved seats exceed school count under single-seat placement")
        return cls(
            n_schools=n,
            n_students=n_students,
            pref_length=constants.k,
            capacity=constants.q_bar,
            majority_share=majority_share,
            n_reserved_seats=n_reserved,
            weight_ratio=constants.r,
            seed=seed,
        )

    def to_json_dict(self) -> dict:
        out = {
            "n_schools": self.n_schools,
            "n_students": self.n_students,
            "pref_length": self.pref_length,
            "capacity": self.capacity,
            "majority_share": self.majority_share,
            "n_reserved_seats": self.n_reserved_seats,
            "reserve_placement": self.reserve_placement,
            "weight_ratio": self.weight_ratio,
            "seed": self.seed,
        }
        if self.reserve_schools is not None:
            out["reserve_schools"] = list(self.reserve_schools)
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RandomMarketParams":
        kwargs = dict(doc)
        if "reserve_schools" in kwargs:
            kwargs["reserve_schools"] = tuple(kwargs["reserve_schools"])
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ValueError(f"bad params file: {e}") from e


def draw_preferences(school_ids: Sequence[str], weights: SchoolWeights,
                     student_type: str, k: int, rng: np.random.Generator) -> list[str]:
    """Draw an ordered list of k distinct schools for one student.

    Schools are selected one at a time, each proportional to the remaining
    weights for the student's type, so majority students never draw a school
    whose majority weight is zero.
    """
    vec = weights.majority if student_type == MAJORITY else weights.minority
    if student_type not in (MAJORITY, MINORITY):
        raise ValueError(f"unknown student type {student_type!r}")
    idx = _draw_indices(np.asarray(vec, dtype=float), k, rng)
    return [school_ids[i] for i in idx]


def _draw_indices(weights: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    if int(np.count_nonzero(weights > 0)) < k:
        raise ValueError(f"need at least {k} positive-weight schools")
    w = weights.astype(float).copy()
    out: list[int] = []
    for _ in range(k):
        cum = np.cumsum(w)
        u = rng.random() * cum[-1]
        i = int(np.searchsorted(cum, u, side="right"))
        i = min(i, len(w) - 1)  # guard against u landing exactly on the total
        out.append(i)
        w[i] = 0.0
    return out


@dataclass
class RawMarket:
    """Index-level realization shared by the string-level Market and the
    engine-facing IndexedMarket."""

    n_schools: int
    n_students: int
    is_majority: np.ndarray
    prefs: list[list[int]]
    perms: np.ndarray          # (n_schools, n_students) priority order, best first
    capacity: np.ndarray
    reserve: np.ndarray        # seats reserved per school
    alpha: np.ndarray
    beta: np.ndarray

    student_ids: tuple[str, ...] = field(init=False)
    school_ids: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        self.student_ids = _make_ids("s", self.n_students)
        self.school_ids = _make_ids("c", self.n_schools)

    def indexed(self) -> IndexedMarket:
        n, m = self.n_schools, self.n_students
        rank = np.empty((n, m), dtype=np.int32)
        rank[np.arange(n)[:, None], self.perms] = np.arange(m, dtype=np.int32)[None, :]
        return IndexedMarket(self.student_ids, self.school_ids, self.is_majority,
                             self.prefs, rank, self.capacity)

    def to_market(self) -> Market:
        students = tuple(
            Student(
                id=self.student_ids[s],
                type=MAJORITY if self.is_majority[s] else MINORITY,
                prefs=tuple(self.school_ids[c] for c in self.prefs[s]),
            )
            for s in range(self.n_students)
        )
        schools = tuple(
            School(
                id=self.school_ids[c],
                capacity=int(self.capacity[c]),
                priority=tuple(self.student_ids[s] for s in self.perms[c]),
            )
            for c in range(self.n_schools)
        )
        policy = Policy.minority_reserve(
            {self.school_ids[c]: int(self.reserve[c]) for c in range(self.n_schools)})
        return Market(students, schools, policy)


def _make_ids(prefix: str, count: int) -> tuple[str, ...]:
    width = len(str(count))
    return tuple(f"{prefix}{i + 1:0{width}d}" for i in range(count))


def generate_scaffold(params: RandomMarketParams, rng: np.random.Generator) -> RawMarket:
    """Everything except preferences: weights, reserved-seat placement,
    capacities and priorities. Draw order is fixed (weights, placement,
    priorities) so seeds stay reproducible."""
    n, m = params.n_schools, params.n_students
    if params.weights is not None:
        weights = params.weights
    elif params.weight_ratio == 1.0:
        weights = SchoolWeights.uniform(n)
    else:
        weights = SchoolWeights.ratio_bounded(n, params.weight_ratio, rng)
    alpha = np.asarray(weights.majority, dtype=float)
    beta = np.asarray(weights.minority, dtype=float)

    capacity = np.full(n, params.capacity, dtype=np.int64)
    reserve = np.zeros(n, dtype=np.int64)
    if params.n_reserved_seats > 0:
        if params.reserve_placement == PLACEMENT_FIXED:
            chosen = list(params.reserve_schools or ())
        elif params.reserve_placement == PLACEMENT_WEIGHTED:
            chosen = _draw_indices(beta, params.n_reserved_seats, rng)
        else:
            chosen = rng.permutation(n)[: params.n_reserved_seats].tolist()
        for c in chosen:
            reserve[c] += 1
    if np.any(reserve > capacity):
        raise MarketError("reserved seats exceed capacity at some school")

    # No majority student may list a school whose whole capacity is reserved.
    fully_reserved = reserve == capacity
    if fully_reserved.any():
        alpha = alpha.copy()
        alpha[fully_reserved] = 0.0
        total = alpha.sum()
        if total <= 0:
            raise MarketError("every school is fully reserved; majority students have no options")
        alpha = alpha / total
    n_majority = int(round(params.majority_share * m))
    if int(np.count_nonzero(alpha > 0)) < params.pref_length and n_majority > 0:
        raise MarketError("fewer positive-weight schools than the preference length "
                          "for majority students")

    is_majority = np.zeros(m, dtype=bool)
    is_majority[:n_majority] = True

    perms = rng.permuted(np.tile(np.arange(m), (n, 1)), axis=1)
    return RawMarket(n, m, is_majority, [[] for _ in range(m)], perms,
                     capacity, reserve, alpha, beta)


def generate_raw(params: RandomMarketParams, rng: np.random.Generator | None = None) -> RawMarket:
    """Scaffold plus eagerly drawn preferences for every student."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(params.seed))
    raw = generate_scaffold(params, rng)
    k = params.pref_length
    for s in range(raw.n_students):
        vec = raw.alpha if raw.is_majority[s] else raw.beta
        raw.prefs[s] = _draw_indices(vec, k, rng)
    return raw


def generate_random_market(params: RandomMarketParams,
                           rng: np.random.Generator | None = None) -> Market:
    """Draw one market: weighted preference lists, uniform random priorities,
    and a minority-reserve policy from the placement rule. Deterministic for
    a given seed."""
    return generate_raw(params, rng).to_market()


@dataclass(frozen=True)
class ConditionReport:
    """Per-market verdicts for the six regularity conditions."""

    n_schools: int
    pref_length_bounded: bool      # (1) k^n <= k
    capacity_bounded: bool         # (2) q_c <= q_bar
    student_growth: bool           # (3) |S| <= lam*n and sum(q) - |S| >= kappa*n
    reserve_growth: bool           # (4) reserved seats <= ceil(theta * n^a)
    moderate_similarity: bool      # (5) weight ratios within [1/r, r]
    zero_weight_iff_zero_quota: bool  # (6) alpha_c = 0 exactly at zero-quota schools

    @property
    def all_ok(self) -> bool:
        return (self.pref_length_bounded and self.capacity_bounded and self.student_growth
                and self.reserve_growth and self.moderate_similarity
                and self.zero_weight_iff_zero_quota)


@dataclass(frozen=True)
class RegularityReport:
    rows: tuple[ConditionReport, ...]

    @property
    def all_ok(self) -> bool:
        return all(r.all_ok for r in self.rows)


def check_regularity(params_seq: Sequence[RandomMarketParams],
                     constants: RegularityConstants) -> RegularityReport:
    """Realize each market and evaluate the regularity conditions against the
    given constants. Violations are reported, never raised."""
    rows = []
    for params in params_seq:
        raw = generate_raw(params)
        n = params.n_schools
        total_seats = int(raw.capacity.sum())
        nonzero_ratio_ok = True
        for vec in (raw.alpha, raw.beta):
            nz = vec[vec > 0]
            if nz.size and nz.max() / nz.min() > constants.r * (1 + 1e-9):
                nonzero_ratio_ok = False
        quota = raw.capacity - raw.reserve
        zero_ok = bool(np.array_equal(raw.alpha == 0, quota == 0))
        rows.append(ConditionReport(
            n_schools=n,
            pref_length_bounded=params.pref_length <= constants.k,
            capacity_bounded=int(raw.capacity.max()) <= constants.q_bar,
            student_growth=(params.n_students <= constants.lam * n + 1e-9
                            and total_seats - params.n_students >= constants.kappa * n - 1e-9),
            reserve_growth=int(raw.reserve.sum()) <= constants.reserved_seat_bound(n),
            moderate_similarity=nonzero_ratio_ok,
            zero_weight_iff_zero_quota=zero_ok,
        ))
    return RegularityReport(tuple(rows))
