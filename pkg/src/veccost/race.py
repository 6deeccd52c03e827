"""
Head-to-head racing on a ring track. At every decision epoch both players roll out
their nine primitives, the competitive and safety cost matrices are built from the
rollouts, each player picks a trajectory, and both trajectories are executed for one
horizon.
"""
from __future__ import annotations

import csv
import math
import os
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from logging import getLogger
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .adjustment import select_policy
from .dynamics import Trajectory, VehicleState, rollout_all
from .game import DimensionError, scalarize, security_policy_col, security_policy_row
from .models import (
    ConfigError,
    Method,
    PlayerConfig,
    RaceConfig,
    RaceStats,
    Role,
    Scenario,
    TraceRecord,
    VehicleParams,
)
from .track import Track, separations
from .utils import dumps, env_int

logger = getLogger("veccost")

THREADS_VARIABLE = "VECCOST_THREADS"

RaceCosts = namedtuple("RaceCosts", "A1 B1 A2 B2")
BatchResult = namedtuple("BatchResult", "aggregate races")


def batch_workers() -> int:
    """
    Returns the number of parallel races allowed by `VECCOST_THREADS`, by default
    `min(4, os.cpu_count())`.
    """
    try:
        return env_int(THREADS_VARIABLE, min(4, os.cpu_count() or 1))
    except ValueError as e:
        raise ConfigError(str(e))


def replace_config(cfg: RaceConfig, **changes) -> RaceConfig:
    """
    Returns a validated copy of `cfg` with some fields replaced.
    """
    data = cfg.to_json_dict()
    data.update(changes)
    return RaceConfig.from_dict(data)


def build_cost_matrices(
    trajs1: Sequence[Trajectory],
    trajs2: Sequence[Trajectory],
    track: Track,
    cfg: RaceConfig,
    start1: Optional[float] = None,
    start2: Optional[float] = None,
) -> RaceCosts:
    """
    Builds both players' cost matrices from their candidate trajectories; row `gamma`
    is player 1's `trajs1[gamma - 1]`, column `sigma` is player 2's `trajs2[sigma - 1]`.

    - `A1(gamma, sigma)` is player 2's terminal progress minus player 1's, `A2 = -A1`.
    - `B1` charges `off_track_per_point` for every off-track point of player 1's own
      trajectory plus `collision_one_time` when the two trajectories collide; `B2` is
      the same with player 2's own off-track points.

    `start1` and `start2` are the players' current unwrapped progress; when omitted,
    the arc position of each initial state is used.
    """
    if not trajs1 or not trajs2:
        raise DimensionError("Both players need at least one candidate trajectory")
    lengths = {len(t) for t in trajs1} | {len(t) for t in trajs2}
    if len(lengths) > 1:
        raise DimensionError("Candidate trajectories differ in length: %s" % sorted(lengths))
    if start1 is None:
        start1 = track.arc_position(*trajs1[0].initial[:2])
    if start2 is None:
        start2 = track.arc_position(*trajs2[0].initial[:2])

    progress1 = np.array([track.trajectory_progress(t, start1) for t in trajs1])
    progress2 = np.array([track.trajectory_progress(t, start2) for t in trajs2])
    A1 = progress2[None, :] - progress1[:, None]

    positions1 = np.stack([t.positions for t in trajs1])
    positions2 = np.stack([t.positions for t in trajs2])
    gaps = np.linalg.norm(positions1[:, None] - positions2[None, :], axis=-1)
    collision = cfg.collision_one_time * (gaps <= cfg.collision_radius).any(axis=-1)

    off1 = np.array([track.off_track_count(t) for t in trajs1], dtype=float)
    off2 = np.array([track.off_track_count(t) for t in trajs2], dtype=float)
    B1 = cfg.off_track_per_point * off1[:, None] + collision
    B2 = cfg.off_track_per_point * off2[None, :] + collision
    return RaceCosts(A1, B1, -A1, B2)


class Racer:
    """
    The running state of one vehicle during a race.
    """

    def __init__(self, number: int, config: PlayerConfig, params: VehicleParams, state, progress):
        self.number = number
        self.config = config
        self.params = params
        self.state = state
        self.start_progress = progress
        self.progress = progress
        self.lead_steps = 0
        self.off_track_epochs = 0

    def __repr__(self):
        return "<Racer %d %s %s>" % (self.number, self.role.value, self.config.method.value)

    @property
    def role(self) -> Role:
        return self.config.role

    def laps(self, track: Track) -> float:
        return (self.progress - self.start_progress) / track.circumference


def vehicle_params(cfg: RaceConfig, player: PlayerConfig) -> VehicleParams:
    """
    Returns the race's vehicle parameters with the player's own speed cap.
    """
    data = cfg.vehicle.to_dict()
    data["v_max"] = player.v_max
    return VehicleParams(**data).validate()


def spawn(cfg: RaceConfig, track: Track) -> dict[Role, tuple[VehicleState, float]]:
    """
    Places both vehicles on the centerline: the defender at a uniformly random arc
    position and the attacker a random gap in `[spawn_gap_min, spawn_gap_max]` behind
    it, both at `initial_speed`. Returns each role's state and starting progress.
    """
    rng = np.random.default_rng(cfg.seed)
    defender_arc = float(rng.uniform(0.0, track.circumference))
    gap = float(rng.uniform(cfg.spawn_gap_min, cfg.spawn_gap_max))
    placed = {}
    for role, arc in ((Role.DEFENDER, defender_arc), (Role.ATTACKER, defender_arc - gap)):
        state = track.point_at(arc)._replace(v=cfg.initial_speed)
        placed[role] = (state, arc)
    return placed


def _sign(value: float) -> int:
    return (value > 0) - (value < 0)


def run_race(cfg: RaceConfig, log_progress: bool = False) -> tuple[list[TraceRecord], RaceStats]:
    """
    Simulates one race and returns the trace (one record per player per step) and
    its statistics. The result depends only on `cfg`.

    Player 1 (rows) and player 2 (columns) are assigned by `cfg.scenario`. A scalarized
    player plays the lowest-indexed security policy of its weighted cost. The
    vector-cost player runs `select_policy` against the opponent's security column,
    falling back to scalarization when no adjustment is possible.

    Events are judged on the states each epoch produces: an epoch counts one collision
    if the vehicles come within `collision_radius` at any step, and one off-track event
    per vehicle that leaves the track at any step. A pass is a change of sign of the
    attacker's progress lead between epoch boundaries. Collisions do not stop the race.
    """
    cfg.validate()
    track = Track(cfg.track)
    log = logger.info if log_progress else logger.debug
    placed = spawn(cfg, track)
    racers = []
    for number, player in enumerate(cfg.players(), start=1):
        state, progress = placed[player.role]
        racers.append(Racer(number, player, vehicle_params(cfg, player), state, progress))
    first, second = racers
    by_role = {r.role: r for r in racers}
    attacker, defender = by_role[Role.ATTACKER], by_role[Role.DEFENDER]

    trace = []
    passes = collisions = vector_epochs = adjusted_epochs = total_steps = 0
    last_sign = _sign(attacker.progress - defender.progress)

    for epoch in range(cfg.epochs):
        trajs1 = rollout_all(first.state, first.params)
        trajs2 = rollout_all(second.state, second.params)
        costs = build_cost_matrices(trajs1, trajs2, track, cfg, first.progress, second.progress)
        C2 = scalarize(costs.A2, costs.B2, second.config.theta)
        sigma = security_policy_col(C2).policies[0]
        if first.config.method is Method.VECTOR_COST:
            selection = select_policy(costs.A1, costs.B1, C2, first.config.theta, cfg.epsilon)
            gamma = selection.gamma
            first_method = selection.method.value
            vector_epochs += 1
            adjusted_epochs += selection.adjusted
        else:
            C1 = scalarize(costs.A1, costs.B1, first.config.theta)
            gamma = security_policy_row(C1).policies[0]
            first_method = Method.SCALARIZED.value
        methods = (first_method, Method.SCALARIZED.value)

        executed = (trajs1[gamma - 1], trajs2[sigma - 1])
        close = separations(*executed) <= cfg.collision_radius
        if close[1:].any():
            collisions += 1
        off = [track.off_track_mask(traj) for traj in executed]
        for racer, racer_off in zip(racers, off):
            if racer_off[1:].any():
                racer.off_track_epochs += 1
        for k in range(1, len(executed[0])):
            for racer, traj, method, racer_off in zip(racers, executed, methods, off):
                state = traj[k]
                record = TraceRecord(
                    epoch=epoch,
                    step=k,
                    player=racer.number,
                    x=state.x,
                    y=state.y,
                    v=state.v,
                    psi=state.psi,
                    beta=state.beta,
                    chosen_gamma=gamma,
                    chosen_sigma=sigma,
                    method=method,
                    off_track=bool(racer_off[k]),
                    collided=bool(close[k]),
                )
                trace.append(record)

        for k in range(1, len(executed[0])):
            for racer, traj in zip(racers, executed):
                racer.progress = track.progress(traj[k], racer.progress)
            total_steps += 1
            if attacker.progress > defender.progress:
                attacker.lead_steps += 1
            elif defender.progress > attacker.progress:
                defender.lead_steps += 1
        for racer, traj in zip(racers, executed):
            racer.state = traj.terminal

        sign = _sign(attacker.progress - defender.progress)
        if sign:
            if last_sign and sign != last_sign:
                passes += 1
            last_sign = sign
        log(
            "Epoch %d: gamma=%d (%s) sigma=%d, attacker lead %.3f m",
            epoch,
            gamma,
            first_method,
            sigma,
            attacker.progress - defender.progress,
        )

    stats = RaceStats(
        scenario=cfg.scenario,
        seed=cfg.seed,
        races=1,
        epochs=cfg.epochs,
        passes=passes,
        collisions=collisions,
        attacker_off_track=attacker.off_track_epochs,
        defender_off_track=defender.off_track_epochs,
        attacker_lead_time_fraction=attacker.lead_steps / total_steps if total_steps else 0.0,
        defender_lead_time_fraction=defender.lead_steps / total_steps if total_steps else 0.0,
        attacker_laps=attacker.laps(track),
        defender_laps=defender.laps(track),
        vector_epochs=vector_epochs,
        adjusted_epochs=adjusted_epochs,
        feasibility_rate=adjusted_epochs / vector_epochs if vector_epochs else 0.0,
    )
    logger.info(
        "Race scenario=%s seed=%d: %d passes, %d collisions, off-track %d/%d, laps %.3f/%.3f",
        cfg.scenario.value,
        cfg.seed,
        passes,
        collisions,
        stats.attacker_off_track,
        stats.defender_off_track,
        stats.attacker_laps,
        stats.defender_laps,
    )
    return trace, stats


def _race_stats(cfg_data: dict[str, Any], log_progress: bool) -> dict[str, Any]:
    # Runs in a worker process, so only plain data crosses the boundary
    _, stats = run_race(RaceConfig.from_dict(cfg_data), log_progress)
    return stats.to_json_dict()


def aggregate(races: Sequence[RaceStats]) -> RaceStats:
    """
    Combines per-race statistics: event counts and epochs are summed, fractions and
    laps are averaged, and the feasibility rate is recomputed from the summed epochs.
    """
    assert races, "Cannot aggregate an empty batch"
    scenarios = {r.scenario for r in races}
    assert len(scenarios) == 1, "Cannot aggregate races of different scenarios"
    total = {
        name: sum(getattr(r, name) for r in races)
        for name in (
            "epochs",
            "passes",
            "collisions",
            "attacker_off_track",
            "defender_off_track",
            "vector_epochs",
            "adjusted_epochs",
        )
    }
    mean = {
        name: math.fsum(getattr(r, name) for r in races) / len(races)
        for name in (
            "attacker_lead_time_fraction",
            "defender_lead_time_fraction",
            "attacker_laps",
            "defender_laps",
        )
    }
    vector_epochs = total["vector_epochs"]
    return RaceStats(
        scenario=scenarios.pop(),
        seed=None,
        races=len(races),
        feasibility_rate=total["adjusted_epochs"] / vector_epochs if vector_epochs else 0.0,
        **total,
        **mean,
    )


def run_batch(
    cfg: RaceConfig, n: int, max_workers: Optional[int] = None, log_progress: bool = False
) -> BatchResult:
    """
    Runs `n` races with seeds `cfg.seed, cfg.seed + 1, ...` and returns the aggregate
    and the per-race statistics in seed order. Races run in up to `max_workers`
    processes (default: `batch_workers()`); the result does not depend on the number
    of workers.
    """
    if n < 1:
        raise ConfigError("A batch needs at least one race, got %d" % n)
    configs = [replace_config(cfg, seed=cfg.seed + k) for k in range(n)]
    workers = min(max_workers or batch_workers(), n)
    if workers > 1:
        logger.info("Running %d races on %d workers", n, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            data = list(
                pool.map(_race_stats, [c.to_json_dict() for c in configs], repeat(log_progress))
            )
        races = [RaceStats(**d) for d in data]
    else:
        races = [run_race(c, log_progress)[1] for c in configs]
    result = BatchResult(aggregate(races), races)
    logger.info(
        "Batch scenario=%s races=%d: %d passes, %d collisions, feasibility %.4f",
        cfg.scenario.value,
        n,
        result.aggregate.passes,
        result.aggregate.collisions,
        result.aggregate.feasibility_rate,
    )
    return result


def compare_scenarios(
    cfg: RaceConfig,
    n: int,
    scenarios: Iterable[Scenario] = tuple(Scenario),
    max_workers: Optional[int] = None,
    log_progress: bool = False,
) -> dict[Scenario, BatchResult]:
    """
    Runs the same seeds under each scenario and returns the batches in scenario order.
    """
    return {
        scenario: run_batch(replace_config(cfg, scenario=scenario), n, max_workers, log_progress)
        for scenario in scenarios
    }


def _writer(f):
    return csv.writer(f, lineterminator="\n")


def write_trace_csv(path, trace: Iterable[TraceRecord]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = _writer(f)
        writer.writerow(TraceRecord.csv_header())
        for record in trace:
            writer.writerow(record.to_csv_row())


def write_stats_json(path, stats: RaceStats):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(stats.to_json_dict()))


def _aggregate_row(stats: RaceStats) -> list[str]:
    row = stats.to_csv_row()
    row[RaceStats.csv_header().index("seed")] = "aggregate"
    return row


def write_batch_csv(path, result: BatchResult):
    """
    Writes one row per race followed by the aggregate row, whose seed reads `aggregate`.
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = _writer(f)
        writer.writerow(RaceStats.csv_header())
        for stats in result.races:
            writer.writerow(stats.to_csv_row())
        writer.writerow(_aggregate_row(result.aggregate))


def write_comparison_csv(path, results: dict[Scenario, BatchResult]):
    """
    Writes one aggregate row per scenario.
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = _writer(f)
        writer.writerow(RaceStats.csv_header())
        for result in results.values():
            writer.writerow(_aggregate_row(result.aggregate))


__all__ = [
    "RaceCosts",
    "BatchResult",
    "Racer",
    "batch_workers",
    "replace_config",
    "build_cost_matrices",
    "vehicle_params",
    "spawn",
    "run_race",
    "aggregate",
    "run_batch",
    "compare_scenarios",
    "write_trace_csv",
    "write_stats_json",
    "write_batch_csv",
    "write_comparison_csv",
]
