"""Command-line harness.

Subcommands: run (single seeded run), scan (scaling experiments), verify
(exact placement-bound sweeps), phases (phase-size report), bounds
(closed-form reference values), tail (Poisson upper tails). The default
seed comes from the BALLAST_SEED environment variable. All logarithms in
reported quantities are base 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import analysis, core, harness, policies


def _env_seed() -> int:
    return int(os.environ.get("BALLAST_SEED", "0"))


def parse_epsilon_grid(text: str) -> list[Fraction]:
    """Exact epsilon values from "start:stop:step" or a comma list.

    Decimal strings convert exactly (Fraction("0.05") == 1/20), so grid
    boundaries behave exactly in the strict forbidden-set comparison.
    """
    if ":" in text:
        start_s, stop_s, step_s = text.split(":")
        start, stop, step = Fraction(start_s), Fraction(stop_s), Fraction(step_s)
        if step <= 0:
            raise ValueError("epsilon grid step must be positive")
        grid = []
        v = start
        while v <= stop:
            grid.append(v)
            v += step
    else:
        grid = [Fraction(part) for part in text.split(",") if part]
    if not grid or any(not 0 < e < 1 for e in grid):
        raise ValueError(f"epsilon grid values must lie in (0, 1): {text!r}")
    return grid


def _add_policy_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--policy", required=required, help="policy name (see `ballast run --help`)")
    p.add_argument("--cluster-size", type=int, help="clustered: bins per cluster")
    p.add_argument("--counter-cap", type=int, help="clustered: counter saturation value")
    p.add_argument("--advice-threshold", type=int, help="advice: overload threshold")


def _policy_params(args) -> dict:
    params = {}
    if args.cluster_size is not None:
        params["cluster_size"] = args.cluster_size
    if args.counter_cap is not None:
        params["counter_cap"] = args.counter_cap
    if getattr(args, "advice_threshold", None) is not None:
        params["threshold"] = args.advice_threshold
    return params


def _build_policy(args, n: int) -> policies.Policy:
    params = _policy_params(args)
    if args.policy == "advice" and "threshold" not in params:
        params["threshold"] = analysis.advice_threshold(n, args.delta)
    return policies.make_policy(args.policy, **params)


def _dump(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=1)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    print(text)


# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    config = core.SimConfig(
        n=args.n, seed=args.seed, balls=args.balls, record_trace=bool(args.trace_out)
    )
    policy = _build_policy(args, args.n)
    result = core.simulate_run(config, policy)
    if args.trace_out:
        core.write_trace_csv(result.trace, args.trace_out)
    if args.out:
        with open(args.out, "w") as f:
            f.write(result.to_json() + "\n")
    summary = {
        "policy": policy.name,
        "n": config.n,
        "balls": config.balls,
        "seed": config.seed,
        "max_load": result.max_load,
        "memory_bits": policies.memory_bits(policy, config),
        "histogram": {str(k): v for k, v in core.load_histogram(result.loads).items()},
    }
    print(json.dumps(summary, indent=1))
    return 0


def cmd_scan(args) -> int:
    spec_dict = harness.load_spec_file(args.spec) if args.spec else {}
    if args.n:
        spec_dict["n_values"] = args.n
    if args.policy:
        params = _policy_params(args)
        pols = []
        for name in args.policy:
            rel = {
                k: v
                for k, v in params.items()
                if (name == "clustered" and k in ("cluster_size", "counter_cap"))
                or (name == "advice" and k == "threshold")
            }
            pols.append({"name": name, **rel})
        spec_dict["policies"] = pols
    if args.delta is not None:
        spec_dict["delta"] = args.delta
    if args.trials is not None:
        spec_dict["trials"] = args.trials
    if args.seed is not None:
        spec_dict["base_seed"] = args.seed
    if args.format is not None:
        spec_dict["format"] = args.format
    if args.out is not None:
        spec_dict["output_path"] = args.out
    if args.measure_runtime:
        spec_dict["measure_runtime"] = True
    if "n_values" not in spec_dict or "policies" not in spec_dict:
        print("scan needs n values and policies (via --spec or flags)", file=sys.stderr)
        return 2
    spec = harness.ExperimentSpec.from_dict(spec_dict)
    if not spec.output_path:
        print("scan needs an output path (--out or spec output_path)", file=sys.stderr)
        return 2
    rows = harness.run_experiment(spec, jobs=args.jobs)
    harness.emit(rows, spec.format, spec.output_path)
    print(f"wrote {len(rows)} rows to {spec.output_path}")
    return 0


def cmd_verify(args) -> int:
    n = args.n
    if n > core.PAIR_GUARD:
        print(f"verify needs n <= {core.PAIR_GUARD}", file=sys.stderr)
        return 2
    policy = _build_policy(args, n)
    policy.reset(n, args.balls or n)

    states: list = [policy.snapshot()]
    if isinstance(policy, policies.ClusteredPolicy) and n <= 16:
        cfg = policy.config
        states = list(
            analysis.enumerate_clustered_states(
                cfg.num_clusters(n), cfg.counter_cap, min(args.balls or 8, 8)
            )
        )
    elif policy.state_space_size(n, args.balls or n) != 1:
        states = analysis.probe_states(
            policy, n, args.balls or n, args.seed, max_states=args.max_states
        )

    epsilons = parse_epsilon_grid(args.epsilon_grid) if args.epsilon_grid else ()
    subsets = analysis.all_subsets(n) if args.all_subsets else None
    result = analysis.sweep_placement_bounds(
        policy,
        n,
        states,
        epsilons=epsilons,
        subsets=subsets,
        subset_seed=args.seed ^ 0x5B5E7,
        n_subsets=args.subsets,
    )
    _dump(result.to_dict(), args.out)
    return 0 if result.ok else 1


def cmd_phases(args) -> int:
    if not args.policy and (not args.trace_in or args.forbidden):
        print("phases needs --policy unless reading a trace without --forbidden", file=sys.stderr)
        return 2
    if args.trace_in:
        trace = core.read_trace_csv(args.trace_in)
        pc = _phase_config(args)
        if args.forbidden:
            policy = _build_policy(args, args.n)
            report = analysis.phase_report_with_forbidden(policy, trace, pc, args.epsilon)
        else:
            report = analysis.phase_report(trace, pc, n=args.n)
    else:
        pc = _phase_config(args)
        policy = _build_policy(args, args.n)
        if args.forbidden:
            config = core.SimConfig(n=args.n, seed=args.seed, balls=args.balls, record_trace=True)
            result = core.simulate_run(config, policy)
            replay = _build_policy(args, args.n)
            report = analysis.phase_report_with_forbidden(replay, result.trace, pc, args.epsilon)
        else:
            config = core.SimConfig(n=args.n, seed=args.seed, balls=args.balls)
            report, _ = analysis.run_phase_report(config, policy, pc)
    _dump(report.to_dict(), args.out)
    return 0


def _phase_config(args) -> analysis.PhaseConfig:
    if args.phases:
        return analysis.PhaseConfig(n=args.n, phases=args.phases, delta=args.delta)
    return analysis.PhaseConfig.from_delta(args.n, args.delta)


def cmd_bounds(args) -> int:
    rows = [analysis.theoretical_bounds(n, args.delta).to_dict() for n in args.n]
    _dump({"bounds": rows}, args.out)
    return 0


def cmd_tail(args) -> int:
    rows = []
    print(f"{'t':>4} {'tail P(X>=t)':>16} {'leading term':>16}   lambda={args.lam}")
    for t in range(args.t_max + 1):
        pt = analysis.poisson_upper_tail(args.lam, t)
        rows.append({"t": t, "tail": pt.probability, "leading_term": pt.leading_term})
        print(f"{t:4d} {pt.probability:16.12f} {pt.leading_term:16.12f}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({"lambda": args.lam, "rows": rows}, f, indent=1)
            f.write("\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ballast",
        description="Balls-into-bins simulation and verification harness "
        "(two-choice allocation under explicit memory budgets).",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one seeded run, optional trace dump")
    p.add_argument("--n", type=int, required=True, help="number of bins")
    p.add_argument("--balls", type=int, default=None, help="balls to throw (default n)")
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--delta", type=float, default=0.5)
    _add_policy_flags(p, required=True)
    p.add_argument("--trace-out", help="write the step trace as CSV")
    p.add_argument("--out", help="write the full result as JSON")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("scan", help="scaling scan over (policy, n, trial)")
    p.add_argument("--spec", help="JSON experiment spec; flags override its fields")
    p.add_argument("--n", type=int, nargs="+", help="bin counts")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="base seed (default BALLAST_SEED)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--out", help="output file path")
    p.add_argument("--measure-runtime", action="store_true",
                   help="fill runtime_ms with wall-clock times (breaks byte determinism)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    p.add_argument("--policy", action="append", help="repeatable policy name")
    p.add_argument("--cluster-size", type=int)
    p.add_argument("--counter-cap", type=int)
    p.add_argument("--advice-threshold", type=int)
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("verify", help="exact placement-bound sweep; exit 1 on violations")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--balls", type=int, default=None,
                   help="probe-run length / clustered enumeration depth")
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--delta", type=float, default=0.5)
    _add_policy_flags(p, required=True)
    p.add_argument("--epsilon-grid", help='e.g. "0.05:0.95:0.05" or "0.1,0.5"')
    p.add_argument("--subsets", type=int, default=1000, help="random subsets per check")
    p.add_argument("--all-subsets", action="store_true", help="exhaustive subsets (tiny n)")
    p.add_argument("--max-states", type=int, default=64, help="probe-state cap")
    p.add_argument("--out", help="write the JSON report here as well")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("phases", help="phase-size report for a run or stored trace")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--balls", type=int, default=None)
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--phases", type=int, help="explicit phase count (else derived from delta)")
    _add_policy_flags(p)
    p.add_argument("--trace-in", help="stored trace CSV instead of a live run")
    p.add_argument("--forbidden", action="store_true",
                   help="also report forbidden-set overlap (needs small n)")
    p.add_argument("--epsilon", default=None, help="epsilon for --forbidden (default 1/(2L))")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_phases)

    p = sub.add_parser("bounds", help="closed-form reference values (base-2 logs)")
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("tail", help="Poisson upper-tail table")
    p.add_argument("--lam", type=float, default=2.0)
    p.add_argument("--t-max", type=int, default=30)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_tail)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
