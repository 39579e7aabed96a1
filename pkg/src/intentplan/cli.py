"""Command line: plan, trace and bench."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .bench import TrialError, format_table, run_experiment
from .controller import ControllerConfig, run_fine, run_goal
from .dsl import DomainError, builtin_domain, parse_domain, parse_literals
from .executor import ActionModel
from .grounding import GroundingBudgetExceeded, ground
from .history import History, NoModel, consistent_model
from .levels import LEVELS, fine_setup, generate_level, level_trial
from .planning import MAX_HORIZON_COARSE, Goal, Plan, PlanningTimeout, plan_minimal
from .scenarios import generate_scenario, narrated_trace, ra

log = logging.getLogger(__name__)


def _load(domain: str):
    path = Path(domain)
    if path.exists():
        return parse_domain(path.read_text(), str(path))
    try:
        return builtin_domain(domain)
    except FileNotFoundError:
        raise DomainError(f"{domain}: no such file or bundled domain") from None


def cmd_plan(args: argparse.Namespace) -> int:
    desc = _load(args.domain)
    g = ground(desc)
    init = parse_literals(args.init or "")
    goal = Goal.parse(args.goal)
    unknown = [str(lit.atom) for lit in (*init, *goal.literals) if lit.atom not in g.atom_index]
    if unknown:
        print(f"error: not a fluent of this domain: {', '.join(unknown)}", file=sys.stderr)
        return 2
    h = History()
    for lit in init:
        h.observe(lit.atom, lit.positive, 0)
    model = consistent_model(g, h)
    if isinstance(model, NoModel):
        print(f"error: initial observations are inconsistent: {model.diagnostic}", file=sys.stderr)
        return 2
    try:
        plan = plan_minimal(g, model.final, goal, args.max_horizon, timeout=args.timeout)
    except PlanningTimeout as err:
        print(f"timeout: {err}", file=sys.stderr)
        return 3
    if args.json:
        doc = {"goal": str(goal), "found": isinstance(plan, Plan)}
        if isinstance(plan, Plan):
            doc["actions"] = [str(a) for a in plan.actions]
        print(json.dumps(doc))
    elif isinstance(plan, Plan):
        for i, a in enumerate(plan.actions):
            print(f"{i}: {a}")
        if not plan.actions:
            print("goal already holds")
    else:
        print(f"no plan within {args.max_horizon} steps")
    return 0 if isinstance(plan, Plan) else 1


def cmd_trace(args: argparse.Namespace) -> int:
    # scenarios run noise-free; level runs use the noisy model, which the fine belief filters
    cfg = ControllerConfig(mode=args.mode.upper(), zooming=not args.no_zoom, seed=args.seed,
                           fine_timeout=args.timeout, action_model=ActionModel.noise_free())
    if args.level:
        setup = fine_setup(args.level)
        task = generate_level(args.level, args.seed)
        record = run_fine(setup, level_trial(task, setup), task.cell_of("rob1"), replace(cfg, action_model=ActionModel()))
    else:
        sc = args.scenario.lower()
        trial = narrated_trace(int(sc[1:])) if sc.startswith("t") else generate_scenario(int(sc), args.seed)
        record = run_goal(ra(), trial, cfg)
    if args.json:
        doc = asdict(record)
        doc["trace"] = list(record.trace)
        print(json.dumps(doc, indent=2))
    else:
        print("\n".join(record.trace))
    return 0 if record.goal_achieved else 1


def cmd_bench(args: argparse.Namespace) -> int:
    cases = args.cases.split(",") if args.cases else None
    try:
        report = run_experiment(args.experiment, args.trials, args.seed, args.out, args.jobs, args.timeout, cases)
    except TrialError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.json:
        print((Path(args.out) / f"{args.experiment}.json").read_text() if args.out else json.dumps(
            {"rows": [asdict(r) for r in report.rows], "gates": [asdict(g) for g in report.gates]}, indent=2))
    else:
        print(format_table(report), end="")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="intentplan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    pl = sub.add_parser("plan", help="shortest plan for a goal")
    pl.add_argument("domain", help="domain file, or the name of a bundled domain (ra, ra_fine)")
    pl.add_argument("--goal", required=True, help="comma-separated literals")
    pl.add_argument("--init", help="observed initial literals; defaults fill the rest")
    pl.add_argument("--max-horizon", type=int, default=MAX_HORIZON_COARSE)
    pl.add_argument("--timeout", type=float)
    pl.add_argument("--json", action="store_true")
    pl.set_defaults(func=cmd_plan)

    tr = sub.add_parser("trace", help="run one trial and print its event log")
    tr.add_argument("--scenario", default="1", help="1-5, or t1/t2 for the two narrated traces")
    tr.add_argument("--level", choices=sorted(LEVELS), help="run a refinement level instead of a scenario")
    tr.add_argument("--mode", choices=["ati", "tp"], default="ati")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--no-zoom", action="store_true")
    tr.add_argument("--timeout", type=float, default=60.0, help="fine-plan timeout in seconds")
    tr.add_argument("--json", action="store_true")
    tr.set_defaults(func=cmd_trace)

    be = sub.add_parser("bench", help="paired-trial experiments")
    be.add_argument("experiment", choices=["h1h2", "h3"])
    be.add_argument("--trials", type=int, default=None)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--out", type=Path)
    be.add_argument("--jobs", type=int, default=1)
    be.add_argument("--timeout", type=float, default=60.0, help="fine-plan timeout in seconds")
    be.add_argument("--cases", help="comma-separated scenarios or levels (default: all)")
    be.add_argument("--json", action="store_true")
    be.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "trials", None) is None and args.command == "bench":
        args.trials = 30 if args.experiment == "h1h2" else 10
    if getattr(args, "timeout", None) is not None and args.timeout <= 0:
        print("error: --timeout must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (DomainError, GroundingBudgetExceeded, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
