"""Command-line front end.

Subcommands:
  match     run a mechanism on a market file and write the matching
  check-ec  effective-competition report plus quota/reserve comparison
  generate  draw a random market from generator parameters
  simulate  paired quota/reserve convergence experiment (CSV + figure)
  chains    rejection-chain diagnostic (CSV + figure)
  oracle    certify a mechanism run against brute-force enumeration

Every stochastic subcommand takes an explicit --seed; there is no wall-clock
entropy anywhere. Exit codes: 0 success, 1 usage or input error,
2 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .equivalence import check_equivalence, effectively_competitive
from .market import (
    Market,
    MarketError,
    Policy,
    market_to_json,
    matching_to_json,
    parse_market,
)
from .mechanisms import PolicyMismatchError, run_sosm, run_sosm_q, run_sosm_r
from .oracle import SearchCapExceeded, enumerate_stable, verify_student_optimal
from .random_markets import RandomMarketParams, RegularityConstants, generate_random_market
from .simulation import (
    chain_csv,
    convergence_csv,
    convergence_report,
    rejection_chain_experiment,
    chain_diagnostic_params,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MarketError, PolicyMismatchError, SearchCapExceeded, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aamatch", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="run a mechanism on a market file")
    p.add_argument("--market", required=True, help="market JSON file")
    p.add_argument("--policy", choices=["none", "quota", "reserve"], default=None,
                   help="override: run with this policy kind (counterpart derived "
                        "from the file's policy)")
    p.add_argument("--out", help="write the matching JSON here (default: stdout)")
    p.add_argument("--trace", help="write the per-round trace JSON here")
    p.add_argument("--format", choices=["json", "human"], default="json")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("check-ec", help="effective-competition report")
    p.add_argument("--market", required=True)
    p.add_argument("--format", choices=["json", "human"], default="json")
    p.set_defaults(func=cmd_check_ec)

    p = sub.add_parser("generate", help="draw a random market")
    p.add_argument("--params", help="JSON file with generator parameters")
    p.add_argument("--n-schools", type=int)
    p.add_argument("--n-students", type=int)
    p.add_argument("--k", type=int, help="preference list length")
    p.add_argument("--capacity", type=int, default=1)
    p.add_argument("--majority-share", type=float, default=0.5)
    p.add_argument("--reserved", type=int, default=0, help="total reserved seats")
    p.add_argument("--ratio", type=float, default=1.0, help="max school popularity ratio")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="write the market JSON here (default: stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="paired quota/reserve convergence experiment")
    p.add_argument("--n", required=True, help="comma-separated market sizes, e.g. 50,100,200")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--a", type=float, default=0.25, help="reserved-seat growth exponent")
    p.add_argument("--theta", type=float, default=1.0, help="reserved-seat scale")
    p.add_argument("--lam", type=float, default=0.5, help="students per school")
    p.add_argument("--kappa", type=float, default=3.0, help="excess seats per school")
    p.add_argument("--k", type=int, default=5, help="preference list length")
    p.add_argument("--qbar", type=int, default=4, help="school capacity")
    p.add_argument("--ratio", type=float, default=1.0, help="max popularity ratio")
    p.add_argument("--majority-share", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    p.add_argument("--out", help="write the CSV here (default: stdout)")
    p.add_argument("--no-plot", action="store_true",
                   help="skip the figure written alongside the CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("chains", help="rejection-chain diagnostic")
    p.add_argument("--n", type=int, required=True, help="number of schools")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lam", type=float, default=0.7, help="students per school, in (0,1)")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.25)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", help="write the per-seat CSV here (default: stdout)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_chains)

    p = sub.add_parser("oracle", help="certify a mechanism run by brute force")
    p.add_argument("--market", required=True)
    p.add_argument("--policy", choices=["quota", "reserve"], required=True)
    p.add_argument("--cap", type=int, default=10_000_000, help="search-space cap")
    p.set_defaults(func=cmd_oracle)

    return parser


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_market(path: str) -> Market:
    return parse_market(_read(path))


def _policy_for(market: Market, choice: str | None) -> tuple[str, Policy | None]:
    """Map the --policy flag onto (mechanism kind, policy override)."""
    if choice is None:
        kind = {"none": "none", "majority_quota": "quota",
                "minority_reserve": "reserve"}[market.policy.kind]
        return kind, None
    if choice == "none":
        return "none", None
    caps = market.capacities()
    reserve = market.reserve_vector()
    if choice == "quota":
        return "quota", Policy.majority_quota({c: caps[c] - reserve[c] for c in caps})
    return "reserve", Policy.minority_reserve(reserve)


def cmd_match(args) -> int:
    market = _load_market(args.market)
    kind, policy = _policy_for(market, args.policy)
    if kind == "none":
        out = run_sosm(market)
    elif kind == "quota":
        out = run_sosm_q(market, policy=policy)
    else:
        out = run_sosm_r(market, policy=policy)
    if args.format == "human":
        lines = [f"rounds: {out.rounds}"]
        for cid in market.school_ids:
            members = ", ".join(sorted(out.matching.schools[cid])) or "-"
            lines.append(f"{cid}: {members}")
        unmatched = sorted(s for s, c in out.matching.students.items() if c is None)
        lines.append("unmatched: " + (", ".join(unmatched) or "-"))
        _write_text(args.out, "\n".join(lines) + "\n")
    else:
        _write_text(args.out, matching_to_json(out.matching))
    if args.trace and out.trace is not None:
        doc = [
            {
                "round": r.index,
                "applications": [list(a) for a in r.applications],
                "held": {c: sorted(v) for c, v in r.held.items()},
                "rejected": {c: sorted(v) for c, v in r.rejected.items()},
            }
            for r in out.trace.rounds
        ]
        _write_text(args.trace, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_check_ec(args) -> int:
    market = _load_market(args.market)
    report = effectively_competitive(market)
    comparison = check_equivalence(market)
    if args.format == "human":
        lines = [f"effectively competitive: {report.verdict}"]
        for e in report.entries:
            mark = "ok" if e.satisfied else "FAILS"
            lines.append(f"  {e.school}: reserve {e.reserve}, "
                         f"first-choice minorities {len(e.first_choice_minorities)} ({mark})")
        lines.append(f"matchings equal: {comparison.matchings_equal}")
        lines.append(f"consistent: {comparison.consistent}")
        _write_text(None, "\n".join(lines) + "\n")
    else:
        _write_text(None, json.dumps(comparison.to_json_dict(), indent=2) + "\n")
    return EXIT_OK if comparison.consistent else EXIT_VERIFY


def cmd_generate(args) -> int:
    if args.params:
        params = RandomMarketParams.from_json_dict(json.loads(_read(args.params)))
        if args.seed is not None:
            params = RandomMarketParams.from_json_dict(
                {**params.to_json_dict(), "seed": args.seed})
    else:
        if args.n_schools is None or args.n_students is None or args.k is None:
            raise ValueError("generate needs --params or --n-schools/--n-students/--k")
        params = RandomMarketParams(
            n_schools=args.n_schools,
            n_students=args.n_students,
            pref_length=args.k,
            capacity=args.capacity,
            majority_share=args.majority_share,
            n_reserved_seats=args.reserved,
            weight_ratio=args.ratio,
            seed=args.seed,
        )
    market = generate_random_market(params)
    _write_text(args.out, market_to_json(market))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not 0.0 <= args.a < 0.5:
        raise ValueError("a must lie in [0, 0.5)")
    constants = RegularityConstants(a=args.a, lam=args.lam, kappa=args.kappa,
                                    theta=args.theta, r=args.ratio, k=args.k,
                                    q_bar=args.qbar)
    n_list = [int(x) for x in args.n.split(",") if x]
    rows = convergence_report(n_list, constants, args.trials, args.seed,
                              majority_share=args.majority_share, jobs=args.jobs)
    _write_text(args.out, convergence_csv(rows))
    if args.out and not args.no_plot:
        from .plotting import write_convergence_figure

        write_convergence_figure(rows, str(Path(args.out).with_suffix(".png")))
    return EXIT_OK


def cmd_chains(args) -> int:
    results = []
    for t in range(args.trials):
        params = chain_diagnostic_params(args.n, lam=args.lam, theta=args.theta,
                                a=args.a, k=args.k)
        results.append(rejection_chain_experiment(params, seed=args.seed + t))
    text = chain_csv(results)
    summary = results[0].summary
    exceed = sum(r.summary.max_length > summary.reference_bound for r in results)
    footer = (f"# bound={summary.reference_bound:.3f} trials={args.trials} "
              f"max_length={max(r.summary.max_length for r in results)} "
              f"exceeding_trials={exceed}\n")
    _write_text(args.out, text + footer)
    if args.out and not args.no_plot:
        from .plotting import write_chain_figure

        write_chain_figure(results, str(Path(args.out).with_suffix(".png")))
    return EXIT_OK


def cmd_oracle(args) -> int:
    market = _load_market(args.market)
    caps = market.capacities()
    reserve = market.reserve_vector()
    if args.policy == "quota":
        policy = Policy.majority_quota({c: caps[c] - reserve[c] for c in caps})
        output = run_sosm_q(market, policy=policy)
    else:
        policy = Policy.minority_reserve(reserve)
        output = run_sosm_r(market, policy=policy)
    stable_set = enumerate_stable(market, policy, search_cap=args.cap)
    member = output.matching in stable_set.stable
    optimal = member and verify_student_optimal(market, policy, output.matching, stable_set)
    verdict = member and optimal
    print(f"stable matchings: {len(stable_set.stable)} "
          f"(examined {stable_set.examined} feasible assignments)")
    print(f"mechanism output stable and student-optimal: {str(verdict).lower()}")
    return EXIT_OK if verdict else EXIT_VERIFY


if __name__ == "__main__":
    raise SystemExit(main())
