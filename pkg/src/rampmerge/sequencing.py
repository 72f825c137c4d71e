"""Merge-order selection: enumerate interleavings, score each, keep the
cheapest.

A merge sequence is an interleaving of the two lane queues that keeps the
order within each lane (no overtaking on a lane), so for M mainline and N
ramp vehicles there are C(M+N, N) candidates.  Each candidate is scored
by rolling out the string tracker and integrating predicted fuel over
the horizon; the minimum-fuel feasible candidate wins.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .fuel import DEFAULT_COEFFICIENTS, FuelCoefficients, trajectory_fuel
from .statespace import build_model
from .tracking import (
    PairGapSpec,
    RepairResult,
    build_reference,
    solve_with_repair,
    weights_for,
)
from .vehicles import ControlLimits, Lane, VehicleState, gap_min_for


class SequenceCapError(ValueError):
    """Raised when the candidate count exceeds the enumeration cap."""


@dataclass(frozen=True)
class MergeSequence:
    """One candidate merge order, downstream-most vehicle first."""

    ids: tuple[int, ...]
    lanes: tuple[Lane, ...]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def first_ramp_index(self) -> int:
        """Position of the earliest ramp vehicle (len(self) if none)."""
        for i, lane in enumerate(self.lanes):
            if lane is Lane.RAMP:
                return i
        return len(self.ids)

    def respects_lane_order(self, mainline_ids: list[int], ramp_ids: list[int]) -> bool:
        """True if both per-lane orders survive in this interleaving."""
        main = [v for v, lane in zip(self.ids, self.lanes) if lane is Lane.MAINLINE]
        ramp = [v for v, lane in zip(self.ids, self.lanes) if lane is Lane.RAMP]
        return main == list(mainline_ids) and ramp == list(ramp_ids)


def count_sequences(n_mainline: int, n_ramp: int) -> int:
    return math.comb(n_mainline + n_ramp, n_ramp)


def _interleavings(
    main: tuple[int, ...], ramp: tuple[int, ...]
) -> Iterator[tuple[tuple[int, ...], tuple[Lane, ...]]]:
    if not main:
        yield ramp, (Lane.RAMP,) * len(ramp)
        return
    if not ramp:
        yield main, (Lane.MAINLINE,) * len(main)
        return
    for rest_ids, rest_lanes in _interleavings(main[1:], ramp):
        yield (main[0],) + rest_ids, (Lane.MAINLINE,) + rest_lanes
    for rest_ids, rest_lanes in _interleavings(main, ramp[1:]):
        yield (ramp[0],) + rest_ids, (Lane.RAMP,) + rest_lanes


def enumerate_sequences(
    mainline_ids: list[int],
    ramp_ids: list[int],
    cap: int = 252,
) -> list[MergeSequence]:
    """All order-preserving interleavings, in a deterministic order.

    Raises ``SequenceCapError`` before enumerating if C(M+N, N) exceeds
    ``cap``; the caller is expected to shrink its membership and retry.
    """
    if not mainline_ids and not ramp_ids:
        raise ValueError("nothing to sequence")
    total = count_sequences(len(mainline_ids), len(ramp_ids))
    if total > cap:
        raise SequenceCapError(
            f"{total} candidate sequences exceed the cap of {cap}"
        )
    return [
        MergeSequence(ids=ids, lanes=lanes)
        for ids, lanes in _interleavings(tuple(mainline_ids), tuple(ramp_ids))
    ]


@dataclass
class ScoringContext:
    """Everything a candidate rollout needs, bundled once per decision."""

    dt: float = 0.1
    horizon: int = 300
    horizon_growth: float = 1.5
    max_horizon: int = 1200
    limits: ControlLimits = field(default_factory=ControlLimits)
    vehicle_length: float = 5.0
    gap_weight_mainline: float = 1.0
    gap_weight_ramp: float = 2.0
    speed_weight_mainline: float = 0.5
    speed_weight_ramp: float = 1.0
    control_weight: float = 1.0
    terminal_factor: float = 10.0
    desired_speed: float = 32.99
    desired_time_headway: float = 1.2
    merge_entry: float = 0.0
    activation_margin: float = 50.0
    fuel: FuelCoefficients = DEFAULT_COEFFICIENTS
    cap: int = 252
    workers: int = 1


@dataclass
class SequenceScore:
    sequence: MergeSequence
    total_fuel: float
    feasible: bool
    horizon: int
    result: RepairResult


def pair_gap_floors(
    sequence: MergeSequence,
    states: Mapping[int, VehicleState],
    limits: ControlLimits,
) -> np.ndarray:
    """Per-pair minimum net gaps, taken from each pair's follower.

    Falls back to the follower's current speed when no buffer-entry speed
    has been recorded yet.
    """
    floors = np.empty(len(sequence) - 1)
    for i in range(len(sequence) - 1):
        follower = states[sequence.ids[i + 1]]
        if follower.entry_speed is None:
            follower = VehicleState(
                id=follower.id, lane=follower.lane, position=follower.position,
                speed=follower.speed, entry_speed=follower.speed,
            )
        floors[i] = gap_min_for(follower, limits)
    return floors


def score_sequence(
    sequence: MergeSequence,
    states: Mapping[int, VehicleState],
    ctx: ScoringContext,
) -> SequenceScore:
    """Roll out one candidate order and integrate its predicted fuel."""
    n = len(sequence)
    model = build_model(n, ctx.dt)
    x0 = np.concatenate([
        [states[v].position for v in sequence.ids],
        [states[v].speed for v in sequence.ids],
    ])
    weights = weights_for(
        sequence.lanes,
        gap_weight_mainline=ctx.gap_weight_mainline,
        gap_weight_ramp=ctx.gap_weight_ramp,
        speed_weight_mainline=ctx.speed_weight_mainline,
        speed_weight_ramp=ctx.speed_weight_ramp,
        control_weight=ctx.control_weight,
        terminal_factor=ctx.terminal_factor,
    )
    floors = pair_gap_floors(sequence, states, ctx.limits)
    specs = [
        PairGapSpec(
            min_net_gap=float(floors[i]),
            cross_lane=sequence.lanes[i] is not sequence.lanes[i + 1],
        )
        for i in range(n - 1)
    ]
    ref = build_reference(
        n, floors, ctx.desired_speed, ctx.desired_time_headway,
        ctx.vehicle_length, ctx.horizon,
    )
    result = solve_with_repair(
        model, weights, ref.r[0], x0, ctx.limits, specs, ctx.vehicle_length,
        horizon=ctx.horizon, merge_entry=ctx.merge_entry,
        activation_margin=ctx.activation_margin, growth=ctx.horizon_growth,
        max_horizon=ctx.max_horizon,
    )
    speeds = np.maximum(result.trajectory.x[:-1, n:], 0.0)
    total = sum(
        trajectory_fuel(speeds[:, i], result.trajectory.u[:, i], ctx.dt, ctx.fuel)
        for i in range(n)
    )
    return SequenceScore(
        sequence=sequence,
        total_fuel=float(total),
        feasible=not result.degraded,
        horizon=result.horizon,
        result=result,
    )


def _selection_key(score: SequenceScore) -> tuple:
    return (score.total_fuel, score.sequence.first_ramp_index, score.sequence.ids)


def optimal_sequence(
    mainline_ids: list[int],
    ramp_ids: list[int],
    states: Mapping[int, VehicleState],
    ctx: ScoringContext,
) -> SequenceScore:
    """Score every admissible interleaving and return the cheapest.

    Feasible candidates always beat degraded ones.  Exact fuel ties break
    toward the sequence whose first ramp vehicle merges earliest, then by
    vehicle ids, so the choice is reproducible.
    """
    candidates = enumerate_sequences(mainline_ids, ramp_ids, cap=ctx.cap)
    if ctx.workers > 1:
        with ThreadPoolExecutor(max_workers=ctx.workers) as pool:
            scores = list(pool.map(lambda s: score_sequence(s, states, ctx), candidates))
    else:
        scores = [score_sequence(s, states, ctx) for s in candidates]
    feasible = [s for s in scores if s.feasible]
    pool_ = feasible if feasible else scores
    return min(pool_, key=_selection_key)
