"""Stochastic matching runs and Monte Carlo experiments on random markets.

Three experiment surfaces:

* ``stochastic_sosm`` runs deferred acceptance with lazily drawn preferences
  (students redraw until they hit a school they have not listed yet); the
  outcome matches the eager mechanism on the realized market.
* ``estimate_equivalence_probability`` / ``convergence_report`` estimate the
  probability that the quota mechanism and its reserve counterpart produce
  the same matching on one shared preference realization, with Wilson
  confidence intervals and the closed-form lower bound
  (1 - lam*k*R*r/n)^(lam*k*R), R = ceil(theta * n^a).
* ``rejection_chain_experiment`` adds reserved seats one at a time and
  measures the eviction cascade each seat triggers under quota semantics.

Every trial derives its own PCG64 stream from (seed, trial index), so results
do not depend on worker count or execution order.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _engine
from ._engine import MODE_QUOTA, MODE_RESERVE
from .market import Market, Policy
from .mechanisms import MechanismOutput
from .random_markets import (
    RandomMarketParams,
    RegularityConstants,
    generate_raw,
    generate_scaffold,
)

Z_95 = 1.959963984540054


@dataclass
class DeferredState:
    """Mutable state of one stochastic run: the ordered school draws per
    student, how many students of each type have entered, and the tentative
    holds per school."""

    drawn: list[list[int]]
    drawn_sets: list[set[int]]
    entered_majority: int
    entered_minority: int
    held: list[list[int]]


def stochastic_sosm(params: RandomMarketParams, policy_kind: str,
                    seed: int) -> tuple[MechanismOutput, Market]:
    """Deferred acceptance with preferences drawn on demand.

    Students enter one at a time in id order. The active student repeatedly
    draws a school from her type's distribution until she gets one she has
    not drawn before, applies there, and on rejection draws again; an evicted
    student becomes the active one. A student who has drawn ``k`` schools and
    holds none stays unmatched. Returns the mechanism output (rounds counts
    processed applications) together with the realized market, whose
    preference lists are exactly the draws each student made.
    """
    if policy_kind not in ("quota", "reserve"):
        raise ValueError(f"policy kind must be 'quota' or 'reserve', got {policy_kind!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    raw = generate_scaffold(params, rng)
    im = raw.indexed()
    if policy_kind == "quota":
        mode, limits = MODE_QUOTA, raw.capacity - raw.reserve
    else:
        mode, limits = MODE_RESERVE, raw.reserve.copy()

    m, k = raw.n_students, params.pref_length
    alpha_cum = np.cumsum(raw.alpha)
    beta_cum = np.cumsum(raw.beta)
    state = DeferredState(
        drawn=[[] for _ in range(m)],
        drawn_sets=[set() for _ in range(m)],
        entered_majority=0,
        entered_minority=0,
        held=[[] for _ in range(raw.n_schools)],
    )
    applications = 0

    def fresh_draw(s: int) -> int:
        cum = alpha_cum if raw.is_majority[s] else beta_cum
        while True:
            u = rng.random() * cum[-1]
            c = min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)
            if c not in state.drawn_sets[s]:
                return c

    for entrant in range(m):
        if raw.is_majority[entrant]:
            state.entered_majority += 1
        else:
            state.entered_minority += 1
        s: int | None = entrant
        while s is not None:
            if len(state.drawn[s]) >= k:
                break  # every acceptable school has rejected her
            c = fresh_draw(s)
            state.drawn[s].append(c)
            state.drawn_sets[s].add(c)
            applications += 1
            new_held = _engine.school_choice(im, mode, limits, c, state.held[c] + [s])
            if s not in new_held:
                continue  # rejected outright; the same student draws again
            evicted = [x for x in state.held[c] if x not in new_held]
            state.held[c] = new_held
            s = evicted[0] if evicted else None

    raw.prefs = state.drawn
    realized = raw.to_market()
    if policy_kind == "quota":
        quota_values = {raw.school_ids[c]: int(raw.capacity[c] - raw.reserve[c])
                        for c in range(raw.n_schools)}
        realized = realized.with_policy(Policy.majority_quota(quota_values))
    from .mechanisms import _matching_from_result  # late import avoids a cycle

    result = _engine.RunResult(
        student_of=_student_of(state.held, m),
        held=state.held,
        rounds=applications,
        applications=applications,
    )
    matching = _matching_from_result(realized, im, result)
    return MechanismOutput(matching, None, applications), realized


def _student_of(held: list[list[int]], m: int) -> list[int | None]:
    out: list[int | None] = [None] * m
    for c, hs in enumerate(held):
        for s in hs:
            out[s] = c
    return out


# ---------------------------------------------------------------------------
# Paired quota/reserve Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationResult:
    """Aggregate of one paired experiment at a single market size."""

    n_schools: int
    trials: int
    equal_count: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    bound: float
    max_eta_c: float
    mean_rounds: float
    seconds: float

    @property
    def ci_half_width(self) -> float:
        return (self.ci_hi - self.ci_lo) / 2.0


def wilson_interval(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    The ends are exact at the boundaries (all successes gives an upper end
    of exactly one), so the interval always contains the point estimate.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def theoretical_lower_bound(n: int, constants: RegularityConstants) -> float:
    """Closed-form lower bound on the probability that counterpart policies
    coincide at size n: (1 - lam*k*R*r/n)^(lam*k*R) with R = ceil(theta*n^a),
    clamped to zero once the base goes non-positive."""
    big_r = constants.reserved_seat_bound(n)
    exponent = constants.lam * constants.k * big_r
    base = 1.0 - constants.lam * constants.k * big_r * constants.r / n
    if exponent == 0:
        return 1.0
    if base <= 0.0:
        return 0.0
    return base ** exponent


def asymptotic_lower_bound(n: int, constants: RegularityConstants) -> float:
    """Limit form of the bound: exp(-lam*k*theta*r)^(lam*k*theta*n^(2a-1)).
    Converges to one as n grows because the exponent vanishes for a < 1/2."""
    lkt = constants.lam * constants.k * constants.theta
    return math.exp(-lkt * constants.r * lkt * n ** (2 * constants.a - 1))


def _paired_trial(params: RandomMarketParams, seed: int, trial: int
                  ) -> tuple[bool, np.ndarray, int]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
    raw = generate_raw(params, rng)
    im = raw.indexed()
    res_q = _engine.run_batch(im, MODE_QUOTA, raw.capacity - raw.reserve)
    res_r = _engine.run_batch(im, MODE_RESERVE, raw.reserve)
    diff = np.fromiter(
        (res_q.held[c] != res_r.held[c] for c in range(raw.n_schools)),
        dtype=bool, count=raw.n_schools)
    return not diff.any(), diff, res_q.rounds + res_r.rounds


def _run_trial_chunk(params: RandomMarketParams, seed: int, start: int, stop: int
                     ) -> tuple[int, np.ndarray, int]:
    equal = 0
    diff_counts = np.zeros(params.n_schools, dtype=np.int64)
    rounds = 0
    for t in range(start, stop):
        ok, diff, r = _paired_trial(params, seed, t)
        equal += int(ok)
        diff_counts += diff
        rounds += r
    return equal, diff_counts, rounds


def estimate_equivalence_probability(params: RandomMarketParams, trials: int, seed: int,
                                     constants: RegularityConstants | None = None,
                                     jobs: int = 1) -> SimulationResult:
    """Estimate the probability that the quota mechanism and its reserve
    counterpart produce identical matchings.

    Each trial realizes one market (a single shared preference draw) and runs
    both mechanisms on it. ``max_eta_c`` is the largest per-school
    disagreement frequency. Deterministic for fixed (params, trials, seed)
    regardless of ``jobs``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t0 = time.perf_counter()
    if jobs <= 1:
        equal, diff_counts, rounds = _run_trial_chunk(params, seed, 0, trials)
    else:
        bounds = np.linspace(0, trials, num=min(jobs, trials) + 1, dtype=int)
        equal, rounds = 0, 0
        diff_counts = np.zeros(params.n_schools, dtype=np.int64)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_trial_chunk, params, seed, int(a), int(b))
                       for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
            for fut in futures:
                e, d, r = fut.result()
                equal += e
                diff_counts += d
                rounds += r
    seconds = time.perf_counter() - t0
    lo, hi = wilson_interval(equal, trials)
    bound = theoretical_lower_bound(params.n_schools, constants) if constants else float("nan")
    return SimulationResult(
        n_schools=params.n_schools,
        trials=trials,
        equal_count=equal,
        p_hat=equal / trials,
        ci_lo=lo,
        ci_hi=hi,
        bound=bound,
        max_eta_c=float(diff_counts.max()) / trials if len(diff_counts) else 0.0,
        mean_rounds=rounds / (2.0 * trials),
        seconds=seconds,
    )


def convergence_report(n_list: Sequence[int], constants: RegularityConstants,
                       trials: int, seed: int, *, majority_share: float = 0.5,
                       jobs: int = 1) -> list[SimulationResult]:
    """Paired experiment across market sizes; one result row per n."""
    rows = []
    for n in n_list:
        base_seed = int(np.random.SeedSequence([seed, n]).generate_state(1)[0])
        params = RandomMarketParams.from_constants(
            constants, n, majority_share=majority_share, seed=base_seed)
        rows.append(estimate_equivalence_probability(
            params, trials, base_seed, constants=constants, jobs=jobs))
    return rows


CSV_HEADER = "n,trials,equal,p_hat,ci_lo,ci_hi,bound,max_eta_c,mean_rounds,seconds"


def convergence_csv(rows: Sequence[SimulationResult]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.n_schools},{r.trials},{r.equal_count},{r.p_hat:.6f},{r.ci_lo:.6f},"
            f"{r.ci_hi:.6f},{r.bound:.6f},{r.max_eta_c:.6f},{r.mean_rounds:.3f},{r.seconds:.3f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Rejection-chain diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainRecord:
    seat_index: int
    school: str
    chain_length: int       # schools whose tentative holds changed
    touched_reserved: bool  # a previously reserved school other than the seat's changed


@dataclass(frozen=True)
class ChainSummary:
    n_schools: int
    n_seats: int
    max_length: int
    mean_length: float
    touched_count: int
    reference_bound: float  # lam * log(n) / (1 - lam) with lam = students/schools


@dataclass(frozen=True)
class ChainExperimentResult:
    records: tuple[ChainRecord, ...]
    summary: ChainSummary


def chain_diagnostic_params(n: int, *, lam: float = 0.7, theta: float = 1.0,
                            a: float = 0.25, k: int = 5, majority_share: float = 0.5,
                            seed: int = 0) -> RandomMarketParams:
    """Preset for the chain diagnostic: unit capacities, uniform weights,
    lam*n students and ceil(theta*n^a) reserved seats, with lam in (0, 1) so
    a constant fraction of schools stays vacant."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1) for the chain diagnostic")
    n_students = int(math.floor(lam * n))
    return RandomMarketParams(
        n_schools=n,
        n_students=max(1, n_students),
        pref_length=min(k, n),
        capacity=1,
        majority_share=majority_share,
        n_reserved_seats=min(int(math.ceil(theta * n ** a - 1e-12)), n),
        weight_ratio=1.0,
        seed=seed,
    )


def rejection_chain_experiment(params: RandomMarketParams, seed: int) -> ChainExperimentResult:
    """Measure the cascade each reserved seat triggers under quota semantics.

    Start from the no-reserve matching, convert seats to reserved status one
    at a time (each at a distinct school) and rerun the quota mechanism after
    each one. The chain length is the number of schools whose tentative holds
    changed; a record is flagged when the change reaches a reserved school
    other than the one that got the new seat. Majority weights stay untouched
    here, since the cascade of interest starts with a majority student losing
    her seat at a newly capped school.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    base = replace(params, n_reserved_seats=0, reserve_schools=None,
                   reserve_placement="uniform")
    raw = generate_raw(base, rng)
    im = raw.indexed()
    n = raw.n_schools
    n_seats = params.n_reserved_seats
    if params.reserve_placement == "fixed" and params.reserve_schools is not None:
        seat_schools = list(params.reserve_schools)
    else:
        seat_schools = rng.permutation(n)[:n_seats].tolist()

    reserve = np.zeros(n, dtype=np.int64)
    prev = _engine.run_batch(im, MODE_QUOTA, raw.capacity - reserve)
    records: list[ChainRecord] = []
    for i, c in enumerate(seat_schools):
        reserve[c] += 1
        cur = _engine.run_batch(im, MODE_QUOTA, raw.capacity - reserve)
        changed = [j for j in range(n) if prev.held[j] != cur.held[j]]
        touched = any(j != c and reserve[j] > 0 for j in changed)
        records.append(ChainRecord(
            seat_index=i,
            school=raw.school_ids[c],
            chain_length=len(changed),
            touched_reserved=touched,
        ))
        prev = cur

    lam_eff = raw.n_students / n
    if not 0.0 < lam_eff < 1.0:
        raise ValueError("chain diagnostic needs students/schools in (0, 1)")
    lengths = [r.chain_length for r in records]
    summary = ChainSummary(
        n_schools=n,
        n_seats=len(records),
        max_length=max(lengths, default=0),
        mean_length=float(np.mean(lengths)) if lengths else 0.0,
        touched_count=sum(r.touched_reserved for r in records),
        reference_bound=lam_eff * math.log(n) / (1.0 - lam_eff),
    )
    return ChainExperimentResult(tuple(records), summary)


CHAIN_CSV_HEADER = "trial,seat_index,school,chain_length,touched_reserved"


def chain_csv(results: Sequence[ChainExperimentResult]) -> str:
    lines = [CHAIN_CSV_HEADER]
    for trial, res in enumerate(results):
        for rec in res.records:
            lines.append(f"{trial},{rec.seat_index},{rec.school},{rec.chain_length},"
                         f"{int(rec.touched_reserved)}")
    return "\n".join(lines) + "\n"
