"""Matching-market engine for quota and reserve affirmative-action policies."""

from .market import (
    Market,
    MarketError,
    Matching,
    Policy,
    School,
    Student,
    convert_policy,
    market_to_json,
    matching_to_json,
    parse_market,
    parse_matching,
    validate_matching,
)
from .mechanisms import (
    BlockingPair,
    MechanismOutput,
    PolicyMismatchError,
    find_blocking_pairs_quota,
    find_blocking_pairs_reserve,
    is_individually_rational,
    run_sequential,
    run_sosm,
    run_sosm_q,
    run_sosm_r,
)
from .equivalence import (
    EffectiveCompetitionReport,
    PolicyComparison,
    SubSchool,
    check_equivalence,
    effectively_competitive,
    split_school_quota,
    split_school_reserve,
)
from .random_markets import (
    RandomMarketParams,
    RegularityConstants,
    SchoolWeights,
    check_regularity,
    draw_preferences,
    generate_random_market,
)
from .simulation import (
    ChainRecord,
    SimulationResult,
    asymptotic_lower_bound,
    convergence_report,
    estimate_equivalence_probability,
    rejection_chain_experiment,
    chain_diagnostic_params,
    stochastic_sosm,
    theoretical_lower_bound,
    wilson_interval,
)
from .oracle import StableSet, SearchCapExceeded, enumerate_stable, verify_student_optimal

__version__ = "0.1.0"
