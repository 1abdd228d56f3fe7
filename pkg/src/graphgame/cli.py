"""Command-line entry point: experiment orchestration and artifact output.

Every command is deterministic given its inputs, flags, and seed; artifacts
are flat JSON/CSV meant to be diffed. Exit codes: 0 success, 1 a completed
check failed, 2 input or usage error, 3 the target's support spans several
graph components (no consistent chain exists), 4 the game graph is not a
product of per-coalition factors, 5 the mixed-equilibrium solver did not
converge. GRAPHGAME_THREADS caps the worker count for replica grids
(default 1, sequential).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .chains import (
    CaseLabel,
    Schedule,
    SupportSplitError,
    build_kernel,
    classify_case,
    dobrushin,
    smooth,
    stationary_distribution,
)
from .games import pure_c_equilibria, violation_witness
from .graphs import NotDecomposableError
from .mixed import (
    MixedProfile,
    NoConvergenceError,
    compute_mixed_equilibrium,
    expected_payoff,
    total_variation,
)
from .repeated import (
    RefereeInit,
    RepeatedConfig,
    decompose_game,
    deviation_test,
    equilibrium_policies,
    simulate_repeated,
    stock_deviation_policies,
)
from .simulate import ComponentSpec, ProductChainSpec, run_product
from .mixed import Distribution

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_SUPPORT_SPLIT = 3
EXIT_NOT_DECOMPOSABLE = 4
EXIT_NO_CONVERGENCE = 5

CONVERGED_TV = 0.1  # desk-scale convergence flag for run summaries


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def parse_schedule(text: str, n_states: int) -> Schedule:
    if text == "theoretical":
        return Schedule.theoretical(n_states)
    if text == "counterexample":
        return Schedule.counterexample()
    if text.startswith("powergap:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("expected powergap:c:e")
        return Schedule.power_gap(int(parts[1]), int(parts[2]))
    raise argparse.ArgumentTypeError(
        "schedule must be theoretical, powergap:c:e, or counterexample"
    )


def worker_count(tasks: int) -> int:
    raw = os.environ.get("GRAPHGAME_THREADS", "")
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        return 1
    return max(1, min(cap, tasks))


def _parallel_map(fn, items):
    workers = worker_count(len(items))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _replica_seeds(seed: int, count: int) -> list[int]:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return [int(s) for s in rng.integers(0, 2**63 - 1, size=count)]


def cmd_analyze(args) -> int:
    game = formats.load_game(args.game)
    out = _out_dir(args)
    equilibria = sorted(game.label_of(p) for p in pure_c_equilibria(game))
    violations = {}
    for prof in game.profiles():
        witness = violation_witness(game, prof)
        if witness is not None:
            h, other, gain = witness
            violations[game.label_of(prof)] = {
                "coalition": formats.coalition_name(h),
                "adjacent_profile": game.label_of(other),
                "gain": gain,
            }
    formats.dump_json(
        {"equilibria": equilibria, "violations": violations}, out / "equilibria.json"
    )
    print(f"{len(equilibria)} pure equilibria -> {out / 'equilibria.json'}")
    return EXIT_OK


def cmd_mixed(args) -> int:
    game = formats.load_game(args.game)
    out = _out_dir(args)
    profile = compute_mixed_equilibrium(game, tol=args.tol)
    doc = {
        "profile": formats.mixed_to_dict(profile),
        "expected_payoffs": {
            formats.coalition_name(h): expected_payoff(game, profile, h)
            for h in range(game.r)
        },
    }
    formats.dump_json(doc, out / "mixed.json")
    print(f"mixed equilibrium -> {out / 'mixed.json'}")
    return EXIT_OK


def cmd_mcmc_build(args) -> int:
    g = formats.load_graph(args.graph)
    target = formats.load_target(args.target, g)
    out = _out_dir(args)
    if args.smooth_k is not None:
        target = smooth(target, args.smooth_k).smoothed
    kernel = build_kernel(target, g)
    formats.dump_kernel_csv(kernel, out / "kernel.csv")
    pi = stationary_distribution(kernel)
    want = np.array([target.masses[g.index(lab)] for lab in kernel.state_labels])
    formats.dump_json(
        {
            "p": kernel.p,
            "dobrushin": dobrushin(kernel),
            "stationary_max_error": float(np.abs(pi - want).max()),
            "states": list(kernel.state_labels),
        },
        out / "build.json",
    )
    print(f"kernel -> {out / 'kernel.csv'}")
    return EXIT_OK


def _tv_checkpoints(steps: int) -> list[int]:
    grid = sorted({min(steps, max(1, int(round(10 ** (i / 8))))) for i in range(0, 200)})
    return [t for t in grid if t <= steps]


def cmd_mcmc_run(args) -> int:
    g = formats.load_graph(args.graph)
    target = formats.load_target(args.target, g)
    out = _out_dir(args)
    case = classify_case(g, target)
    if case is CaseLabel.SUPPORT_SPLIT:
        raise SupportSplitError(
            "target support spans several graph components; no consistent "
            "chain can realize this target"
        )
    schedule = None
    if case is CaseLabel.SUPPORT_IN_COMPONENT:
        schedule = parse_schedule(args.schedule, g.n)
    # single chain: the product-run minimum-gap requirement does not apply,
    # and the counterexample schedule exists precisely to violate it
    spec = ProductChainSpec(
        components=(ComponentSpec(target=target, graph=g, schedule=schedule),),
        steps=args.steps,
        seed=args.seed,
        gap_c=0,
        gap_e=0,
    )
    trace = run_product(spec).components[0]

    formats.dump_trace_csv(trace, out / "trace.csv")
    formats.dump_empirical_csv(trace, out / "empirical.csv")
    series = []
    for t in _tv_checkpoints(args.steps):
        emp = trace.prefix_counts(t) / t
        series.append((t, float(np.abs(emp - target.masses).sum() / 2)))
    formats.dump_series_csv(series, ("t", "tv_to_target"), out / "tv_series.csv")

    if case is CaseLabel.POINT_MASS:
        atom = target.support()[0]
        kernel = build_kernel(
            Distribution(np.array([1.0])),
            type(g)([g.labels[atom]], []),
        )
    elif case is CaseLabel.SUPPORT_CONNECTED:
        from .graphs import induced_subgraph

        support = [g.labels[i] for i in target.support()]
        sub = induced_subgraph(g, support)
        keep = [g.index(lab) for lab in sub.labels]
        kernel = build_kernel(Distribution(target.masses[keep]), sub)
    else:
        from .chains import SmoothedKernelFamily

        family = SmoothedKernelFamily(target, g, schedule)
        last_transition = max(args.steps - 2, schedule.first_time)
        kernel = family.kernel_at(last_transition)
    formats.dump_kernel_csv(kernel, out / "kernel.csv")

    tv_final = series[-1][1]
    summary = {
        "case": case.value,
        "steps": args.steps,
        "seed": args.seed,
        "schedule": schedule.label if schedule is not None else None,
        "tv_final": tv_final,
        "converged": bool(tv_final <= CONVERGED_TV),
    }
    if args.burn_in:
        b = min(args.burn_in, args.steps - 1)
        tail = (trace.counts - trace.prefix_counts(b)) / (trace.length - b)
        summary["burn_in"] = {
            "steps": b,
            "tv_to_target": float(np.abs(tail - target.masses).sum() / 2),
        }
    formats.dump_json(summary, out / "summary.json")
    print(
        f"{case.value}: tv_final={tv_final:.4f} "
        f"({'converged' if summary['converged'] else 'NOT converged'}) -> {out}"
    )
    return EXIT_OK


def cmd_decompose(args) -> int:
    game = formats.load_game(args.game)
    out = _out_dir(args)
    dec = decompose_game(game)
    doc = {
        "factors": [
            {"coalition": formats.coalition_name(h), **formats.graph_to_dict(f)}
            for h, f in enumerate(dec.factors)
        ]
    }
    formats.dump_json(doc, out / "decomposition.json")
    print(f"{len(dec.factors)} factors -> {out / 'decomposition.json'}")
    return EXIT_OK


def _equilibrium_config(game, t_eval: int) -> tuple[RepeatedConfig, MixedProfile]:
    dec = decompose_game(game)
    mixed = compute_mixed_equilibrium(game)
    policies = equilibrium_policies(game, dec, mixed)
    config = RepeatedConfig(
        game=game,
        decomposition=dec,
        policies=policies,
        init=RefereeInit(distributions=tuple(mixed.parts)),
        t_eval=t_eval,
    )
    return config, mixed


def cmd_repeated(args) -> int:
    game = formats.load_game(args.game)
    out = _out_dir(args)
    config, mixed = _equilibrium_config(game, args.t_eval)
    seeds = _replica_seeds(args.seed, args.replicas)
    runs = _parallel_map(lambda s: simulate_repeated(config, s), seeds)
    per_coalition = {}
    for h in range(game.r):
        finals = np.array([report.per_coalition[h].final_average for _, report in runs])
        tails = np.array([report.per_coalition[h].tail_liminf for _, report in runs])
        per_coalition[formats.coalition_name(h)] = {
            "final_average": float(finals.mean()),
            "tail_liminf_estimate": float(tails.mean()),
            "stderr": float(finals.std(ddof=1) / np.sqrt(len(finals)))
            if len(finals) > 1
            else 0.0,
            "replicas": len(finals),
            "expected_payoff": expected_payoff(game, mixed, h),
        }
    formats.dump_json(
        {"per_coalition": per_coalition, "seeds": seeds}, out / "repeated.json"
    )
    formats.dump_trace_csv(runs[0][0], out / "trace.csv")
    print(f"repeated run -> {out / 'repeated.json'}")
    return EXIT_OK


def cmd_folk_check(args) -> int:
    game = formats.load_game(args.game)
    out = _out_dir(args)
    config, mixed = _equilibrium_config(game, args.t_eval)
    match_seed, grid_seed = _replica_seeds(args.seed, 2)

    _, report = simulate_repeated(config, match_seed)
    payoff_match = {}
    match_ok = True
    for h in range(game.r):
        tensor = game.payoffs[h]
        payoff_range = float(tensor.max() - tensor.min())
        tolerance = 0.02 * payoff_range if payoff_range > 0 else 1e-9
        want = expected_payoff(game, mixed, h)
        got = report.per_coalition[h].final_average
        ok = bool(abs(got - want) <= tolerance)
        match_ok = match_ok and ok
        payoff_match[formats.coalition_name(h)] = {
            "average": got,
            "expected": want,
            "tolerance": tolerance,
            "ok": ok,
        }

    cells = []
    for h in range(game.r):
        for policy in stock_deviation_policies(game, config.decomposition, h):
            cells.append((h, policy))
    cell_seeds = _replica_seeds(grid_seed, len(cells))

    def run_cell(item):
        (h, policy), cell_seed = item
        return deviation_test(
            config,
            coalition=h,
            deviation=policy,
            t_eval=args.dev_steps,
            replicas=args.replicas,
            seed=cell_seed,
        )

    reports = _parallel_map(run_cell, list(zip(cells, cell_seeds)))
    deviations = [
        {
            "coalition": formats.coalition_name(r.coalition),
            "policy": r.policy_name,
            "equilibrium_mean": r.equilibrium_mean,
            "deviation_mean": r.deviation_mean,
            "margin": r.margin,
            "verdict": r.verdict,
        }
        for r in reports
    ]
    all_not_improved = all(not r.improved for r in reports)
    passed = match_ok and all_not_improved
    formats.dump_json(
        {
            "equilibrium": formats.mixed_to_dict(mixed),
            "payoff_match": payoff_match,
            "deviations": deviations,
            "pass": passed,
        },
        out / "folk.json",
    )
    print(f"folk check: {'PASS' if passed else 'FAIL'} -> {out / 'folk.json'}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphgame",
        description="Coalition games on strategy graphs: equilibria, "
        "graph-consistent chains, repeated play.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="enumerate pure equilibria of a game file")
    p.add_argument("game")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("mixed", help="compute a mixed equilibrium")
    p.add_argument("game")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mixed)

    p = sub.add_parser("mcmc-build", help="build a reversible kernel for a target")
    p.add_argument("graph")
    p.add_argument("target")
    p.add_argument("--smooth-k", type=positive_int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mcmc_build)

    p = sub.add_parser("mcmc-run", help="simulate a graph-consistent chain")
    p.add_argument("graph")
    p.add_argument("target")
    p.add_argument("--steps", type=positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schedule", default="powergap:1:3")
    p.add_argument("--burn-in", type=nonnegative_int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_mcmc_run)

    p = sub.add_parser("decompose", help="factor a game graph over its coalitions")
    p.add_argument("game")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("repeated", help="run equilibrium chain policies")
    p.add_argument("game")
    p.add_argument("--t-eval", type=positive_int, default=100_000)
    p.add_argument("--replicas", type=positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_repeated)

    p = sub.add_parser("folk-check", help="payoff match plus deviation battery")
    p.add_argument("game")
    p.add_argument("--t-eval", type=positive_int, default=1_000_000)
    p.add_argument("--dev-steps", type=positive_int, default=100_000)
    p.add_argument("--replicas", type=positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_folk_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SupportSplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SUPPORT_SPLIT
    except NotDecomposableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_DECOMPOSABLE
    except NoConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (formats.FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
