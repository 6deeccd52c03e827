"""
The `veccost` command. Every policy index on the command line and in the outputs is
1-based. JSON reports go to stdout, logging goes to stderr.

Exit codes: 0 success, 2 invalid input, 3 infeasible adjustment target,
4 solver did not converge.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Callable, Optional, Sequence

from . import __version__
from .adjustment import (
    AdjustmentProblem,
    ConvergenceError,
    InfeasibleTarget,
    adjust_costs,
    feasible_minimum,
    feasible_targets,
    report,
    row_conditions,
)
from .game import (
    load_game,
    moderate_set,
    pareto_set,
    pure_nash,
    scalarized_security,
    security_policy_col,
    security_policy_row,
    worst_case_set,
)
from .models import RaceConfig, RaceStats, Scenario
from .race import (
    compare_scenarios,
    replace_config,
    run_batch,
    run_race,
    write_batch_csv,
    write_comparison_csv,
    write_stats_json,
    write_trace_csv,
)
from .utils import VecCostException, dumps

logger = logging.getLogger("veccost")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_CONVERGENCE = 4

SUMMARY_FIELDS = (
    "passes",
    "collisions",
    "attacker_off_track",
    "defender_off_track",
    "attacker_lead_time_fraction",
    "attacker_laps",
    "defender_laps",
    "feasibility_rate",
)


class CommandError(VecCostException):
    """
    Raised for invalid combinations of command line options.
    """


def _emit(data):
    sys.stdout.write(dumps(data))


def cmd_solve(args) -> int:
    game = load_game(args.game)
    C1, C2 = game.C1, game.C2
    row = security_policy_row(C1)
    col = security_policy_col(C2)
    solution = scalarized_security(game)
    J1, J2 = game.outcome_vectors(solution.policies)
    data = dict(
        theta=list(game.weights),
        C1=C1,
        C2=C2,
        security=dict(
            player1=dict(policies=row.policies, value=row.value),
            player2=dict(policies=col.policies, value=col.value),
        ),
        security_pair=solution.policies,
        security_pair_is_nash=solution.is_nash,
        outcome=dict(J1=J1, J2=J2),
        pure_nash=pure_nash(C1, C2),
    )
    if args.sigma is not None:
        data["sets"] = dict(
            sigma=args.sigma,
            pareto=pareto_set(game.A1, game.B1, args.sigma),
            worst_case=worst_case_set(game.A1, game.B1, args.sigma),
            moderate=moderate_set(game.A1, game.B1, args.sigma),
        )
    _emit(data)
    return EXIT_OK


def cmd_adjust(args) -> int:
    game = load_game(args.game)
    problem = AdjustmentProblem(game.A1, game.C2, args.r, args.c, args.epsilon)
    result = adjust_costs(problem)
    sys.stdout.write(report(game.A1, game.C2, result))
    if not result.solved:
        logger.warning(
            "Target (%d, %d) is infeasible, violating columns %s",
            args.r,
            args.c,
            result.violating_columns,
        )
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_feasible(args) -> int:
    game = load_game(args.game)
    if not args.epsilon > 0:
        raise CommandError("--epsilon must be positive, got %r" % args.epsilon)
    if (args.r is None) != (args.c is None):
        raise CommandError("--r and --c must be given together")
    if args.r is None:
        _emit(dict(epsilon=args.epsilon, feasible_targets=feasible_targets(game.C2, args.epsilon)))
        return EXIT_OK
    conditions = row_conditions(game.C2, args.r, args.c, args.epsilon)
    _emit(
        dict(
            r=args.r,
            c=args.c,
            epsilon=args.epsilon,
            feasible=feasible_minimum(game.C2, args.r, args.c, args.epsilon),
            conditions=[c._asdict() for c in conditions],
        )
    )
    return EXIT_OK


def load_config(args) -> RaceConfig:
    """
    Reads the race configuration file (an empty configuration when none is given)
    and applies the command line overrides.
    """
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            cfg = RaceConfig.from_json(f.read())
    else:
        cfg = RaceConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "scenario", None) not in (None, "all"):
        overrides["scenario"] = args.scenario
    return replace_config(cfg, **overrides) if overrides else cfg


def summary_line(stats: RaceStats) -> str:
    parts = ["scenario=%s" % stats.scenario.value]
    parts.extend(
        "%s=%s" % (name, stats.get_field(name).to_string(getattr(stats, name)))
        for name in SUMMARY_FIELDS
    )
    return " ".join(parts)


class OutputFiles:
    """
    Tracks the files a command writes, so that they can be removed if it fails.
    """

    def __init__(self, directory: str):
        self.directory = directory
        self.written = []

    def path(self, name: str) -> str:
        os.makedirs(self.directory, exist_ok=True)
        path = os.path.join(self.directory, name)
        self.written.append(path)
        return path

    def discard(self):
        for path in self.written:
            try:
                os.remove(path)
            except FileNotFoundError:
                pass


def _with_outputs(args, write: Callable[[OutputFiles], int]) -> int:
    outputs = OutputFiles(args.out)
    try:
        return write(outputs)
    except BaseException:
        outputs.discard()
        raise


def cmd_race(args) -> int:
    cfg = load_config(args)

    def write(outputs):
        trace, stats = run_race(cfg, log_progress=args.verbose > 0)
        write_trace_csv(outputs.path("trace.csv"), trace)
        write_stats_json(outputs.path("stats.json"), stats)
        print(summary_line(stats))
        return EXIT_OK

    return _with_outputs(args, write)


def cmd_batch(args) -> int:
    cfg = load_config(args)
    if args.races < 1:
        raise CommandError("--races must be at least 1, got %d" % args.races)

    def write(outputs):
        if args.scenario == "all":
            results = compare_scenarios(cfg, args.races)
            for scenario, result in results.items():
                write_batch_csv(outputs.path("batch_%s.csv" % scenario.value), result)
                print(summary_line(result.aggregate))
            write_comparison_csv(outputs.path("comparison.csv"), results)
        else:
            result = run_batch(cfg, args.races)
            write_batch_csv(outputs.path("batch.csv"), result)
            print(summary_line(result.aggregate))
        return EXIT_OK

    return _with_outputs(args, write)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veccost",
        description="Vector-cost bimatrix games, cost adjustment and racing experiments. "
        "All policy indices are 1-based.",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="log INFO (-v) or DEBUG (-vv) to stderr"
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    solve = commands.add_parser("solve", help="security policies, Nash equilibria and policy sets")
    solve.add_argument("--game", required=True, help="game JSON file")
    solve.add_argument("--sigma", type=int, help="column for the Pareto/worst-case/moderate sets")
    solve.set_defaults(handler=cmd_solve)

    adjust = commands.add_parser("adjust", help="adjust player 1's cost towards a target (r, c)")
    adjust.add_argument("--game", required=True, help="game JSON file")
    adjust.add_argument("--r", type=int, required=True, help="target row")
    adjust.add_argument("--c", type=int, required=True, help="target column")
    adjust.add_argument("--epsilon", type=float, default=1e-6, help="positivity margin")
    adjust.set_defaults(handler=cmd_adjust)

    feasible = commands.add_parser("feasible", help="check or list feasible adjustment targets")
    feasible.add_argument("--game", required=True, help="game JSON file")
    feasible.add_argument("--r", type=int, help="target row")
    feasible.add_argument("--c", type=int, help="target column")
    feasible.add_argument("--epsilon", type=float, default=1e-6, help="positivity margin")
    feasible.set_defaults(handler=cmd_feasible)

    race = commands.add_parser("race", help="simulate one race")
    batch = commands.add_parser("batch", help="simulate a batch of seeded races")
    for sub in (race, batch):
        sub.add_argument("--config", help="race configuration JSON file (default: all defaults)")
        sub.add_argument("--out", required=True, help="output directory")
        sub.add_argument("--seed", type=int, help="override the configured seed")
    race.add_argument("--scenario", choices=[s.value for s in Scenario])
    race.set_defaults(handler=cmd_race)
    batch.add_argument("--scenario", choices=[s.value for s in Scenario] + ["all"])
    batch.add_argument("--races", type=int, default=20, help="number of races (default 20)")
    batch.set_defaults(handler=cmd_batch)
    return parser


def configure_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except InfeasibleTarget as e:
        sys.stderr.write("veccost: error: %s\n" % e)
        return EXIT_INFEASIBLE
    except ConvergenceError as e:
        sys.stderr.write("veccost: error: %s\n" % e)
        return EXIT_CONVERGENCE
    except (VecCostException, ValueError, OSError) as e:
        sys.stderr.write("veccost: error: %s\n" % e)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
