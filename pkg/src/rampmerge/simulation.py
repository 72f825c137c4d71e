"""Microscopic merge-corridor simulation.

A single mainline lane and a single on-ramp meet at position 0 of the
shared axis.  Vehicles arrive by Poisson processes (per demand phase),
drive by IDM unless a control layer overrides them, and leave the
network downstream of the merge.  Three modes are supported:

* ``OPTIMAL`` runs the decision-cycle coordinator: ramp inflow is paced
  at the suggested rate and merge strings track jointly planned gaps;
* ``METERING`` holds ramp vehicles at a stop bar near the ramp end and
  releases one per green at the suggested rate;
* ``NONE`` leaves everyone on IDM; ramp vehicles hunt for an acceptable
  mainline gap through the merge zone and force their way in after a
  timeout, which is what produces the familiar merge shockwaves.

The trajectory log quantizes every float to six decimals at append time
so that an exported CSV reproduces the log, and therefore the metrics,
exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .coordinator import HARD_BRAKE, MergeCoordinator, WorldSnapshot
from .fuel import FuelCoefficients, DEFAULT_COEFFICIENTS, fuel_rate
from .idm import IdmParams, idm_accel
from .sequencing import ScoringContext
from .vehicles import ControlLimits, ControlStatus, Lane, MergeGeometry

METERS_PER_MILE = 1609.344
ML_PER_GALLON = 3785.411784

#: net gap (m) required at a lane entrance before a queued arrival spawns
SPAWN_CLEARANCE = 8.0
#: stop position of an unmerged ramp vehicle, short of the merge zone end
MERGE_STOP_SETBACK = 3.0
#: stop bar position for ramp metering, upstream of the merge point
METERING_BAR = -8.0
#: standing this long without an acceptable gap turns insertion pushy
FORCE_TIMEOUT = 5.0
#: reaction margin a human merger leaves to each neighbor (s)
ACCEPT_TAU = 0.5
#: deceleration a merger is willing to impose on the vehicle behind
ACCEPT_YIELD = 3.0
#: uncontrolled ramp vehicles adopt mainline behavior from here on
ACCEL_LANE_START = -30.0
#: a predecessor below this speed (m/s) counts as stalled traffic and
#: flips a commanded follower's envelope to comfort-range braking
STALL_SPEED = 3.0


class ControlMode(Enum):
    OPTIMAL = "optimal"
    METERING = "metering"
    NONE = "none"


@dataclass
class DemandPhase:
    """One stretch of constant demand.  Rates are veh/s."""

    duration: float
    mainline_rate: float
    ramp_rate: float
    q_suggested: float

    def validate(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("phase duration must be positive")
        for name in ("mainline_rate", "ramp_rate"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if self.q_suggested <= 0.0:
            raise ValueError("q_suggested must be positive")


@dataclass
class ScenarioConfig:
    phases: list[DemandPhase]
    mode: ControlMode = ControlMode.OPTIMAL
    seed: int = 0
    dt: float = 0.1
    geometry: MergeGeometry = field(default_factory=MergeGeometry)
    # physical speed cap a touch over the cruising target, so tracking
    # transients cost little extra drag
    limits: ControlLimits = field(default_factory=lambda: ControlLimits(v_max=34.65))
    # mainline car-following at a 1.5 s headway puts lane capacity near
    # 1830 veh/h, the basis the suggested inflow works against; keep its
    # accel gentle, aggressive mainline braking-and-sprinting throws
    # waves the coordinated strings cannot absorb
    mainline_idm: IdmParams = field(
        default_factory=lambda: IdmParams(v0=32.99)
    )
    # ramp drivers queue sportier: quicker launches and later braking
    # make the stop-and-creep cycle burn what it really burns
    ramp_idm: IdmParams = field(
        default_factory=lambda: IdmParams(v0=14.98, T=1.0, a=2.0, b=2.8)
    )
    # heavy control weighting keeps planned accelerations small: strings
    # drift onto their slots instead of sprinting, which is where the
    # fuel advantage over the baselines comes from
    scoring: ScoringContext = field(
        default_factory=lambda: ScoringContext(
            control_weight=100.0, desired_speed=30.0
        )
    )
    fuel: FuelCoefficients = DEFAULT_COEFFICIENTS
    vehicle_length: float = 5.0
    arrival_min_headway: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        # one source of truth for what the planner shares with the world
        self.scoring = replace(
            self.scoring,
            dt=self.dt,
            limits=self.limits,
            vehicle_length=self.vehicle_length,
            fuel=self.fuel,
        )

    def validate(self) -> None:
        if not self.phases:
            raise ValueError("at least one demand phase is required")
        for phase in self.phases:
            phase.validate()
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        self.geometry.validate()
        self.limits.validate()

    @property
    def total_duration(self) -> float:
        return sum(p.duration for p in self.phases)

    def phase_at(self, t: float) -> DemandPhase:
        edge = 0.0
        for phase in self.phases:
            edge += phase.duration
            if t < edge:
                return phase
        return self.phases[-1]


def generate_arrivals(
    rate: float,
    duration: float,
    rng: np.random.Generator,
    min_headway: float = 1.0,
    t0: float = 0.0,
) -> np.ndarray:
    """Poisson arrival times with a minimum headway.

    Draws a Poisson count, spreads it uniformly, then pushes each
    arrival just far enough forward to respect ``min_headway`` (arrivals
    shifted past the end of the interval are dropped).  The expected
    count stays essentially ``rate * duration`` at the rates studied.
    """
    if rate < 0.0 or duration <= 0.0:
        raise ValueError("need rate >= 0 and duration > 0")
    count = int(rng.poisson(rate * duration))
    times = np.sort(rng.uniform(0.0, duration, size=count))
    kept = []
    prev = -math.inf
    for raw in times:
        t = max(float(raw), prev + min_headway)
        if t >= duration:
            break
        kept.append(t)
        prev = t
    return t0 + np.asarray(kept, dtype=float)


class CollisionError(RuntimeError):
    """Two vehicles in one lane overlapped (net gap <= 0)."""

    def __init__(self, t: float, lead_id: int, rear_id: int, gap: float,
                 log: dict[str, np.ndarray] | None = None):
        self.t = t
        self.lead_id = lead_id
        self.rear_id = rear_id
        self.gap = gap
        self.log = log  # partial trajectory history for post-mortems
        super().__init__(
            f"collision at t={t:.1f}s: vehicle {rear_id} overlapped "
            f"vehicle {lead_id} (net gap {gap:.3f} m)"
        )


class TrajectoryLog:
    """Per-step, per-vehicle rows with six-decimal float quantization."""

    FIELDS = ("t", "id", "lane", "position", "speed", "accel", "status", "fuel_rate")

    def __init__(self) -> None:
        self._chunks: list[tuple[np.ndarray, ...]] = []

    def append_step(self, t, ids, lanes, pos, speed, accel, status, fuel) -> None:
        n = len(ids)
        self._chunks.append((
            np.round(np.full(n, t), 6),
            np.asarray(ids, dtype=np.int64).copy(),
            np.asarray(lanes, dtype=np.int64).copy(),
            np.round(pos, 6),
            np.round(speed, 6),
            np.round(accel, 6),
            np.asarray(status, dtype=np.int64).copy(),
            np.round(fuel, 6),
        ))

    def arrays(self) -> dict[str, np.ndarray]:
        if not self._chunks:
            return {
                "t": np.empty(0), "id": np.empty(0, dtype=np.int64),
                "lane": np.empty(0, dtype=np.int64), "position": np.empty(0),
                "speed": np.empty(0), "accel": np.empty(0),
                "status": np.empty(0, dtype=np.int64), "fuel_rate": np.empty(0),
            }
        cols = list(zip(*self._chunks))
        return {
            name: np.concatenate(col)
            for name, col in zip(self.FIELDS, cols)
        }


@dataclass
class GroupMetrics:
    n_vehicles: int
    vmt_miles: float
    vht_hours: float
    q_mph: float
    fuel_ml: float
    economy_mpg: float


@dataclass
class RunMetrics:
    overall: GroupMetrics
    mainline: GroupMetrics
    ramp: GroupMetrics


def _group_metrics(first_pos, last_pos, row_count, fuel_ml, dt) -> GroupMetrics:
    vmt = float(np.sum(last_pos - first_pos)) / METERS_PER_MILE
    vht = row_count * dt / 3600.0
    q = vmt / vht if vht > 0.0 else 0.0
    if fuel_ml > 0.0:
        econ = vmt / (fuel_ml / ML_PER_GALLON)
    else:
        econ = math.inf if vmt > 0.0 else 0.0
    return GroupMetrics(
        n_vehicles=len(first_pos),
        vmt_miles=vmt,
        vht_hours=vht,
        q_mph=q,
        fuel_ml=fuel_ml,
        economy_mpg=econ,
    )


def compute_metrics(log: dict[str, np.ndarray], dt: float) -> RunMetrics:
    """Traffic metrics from a trajectory log.

    A vehicle's origin is the lane of its first logged row, so metrics
    rebuilt from an exported log match the live run exactly.
    """
    ids = log["id"]
    if len(ids) == 0:
        empty = GroupMetrics(0, 0.0, 0.0, 0.0, 0.0, 0.0)
        return RunMetrics(overall=empty, mainline=empty, ramp=empty)
    order = np.argsort(ids, kind="stable")  # stable keeps time order per id
    sorted_ids = ids[order]
    sorted_pos = log["position"][order]
    sorted_lane = log["lane"][order]
    uniq, starts = np.unique(sorted_ids, return_index=True)
    ends = np.append(starts[1:], len(sorted_ids)) - 1
    first_pos = sorted_pos[starts]
    last_pos = sorted_pos[ends]
    origin = sorted_lane[starts]
    rows_per_id = ends - starts + 1

    fuel_step = log["fuel_rate"] * dt
    fuel_sorted = fuel_step[order]
    fuel_per_id = np.add.reduceat(fuel_sorted, starts)

    def group(mask: np.ndarray) -> GroupMetrics:
        return _group_metrics(
            first_pos[mask],
            last_pos[mask],
            int(np.sum(rows_per_id[mask])),
            float(np.sum(fuel_per_id[mask])),
            dt,
        )

    all_mask = np.ones(len(uniq), dtype=bool)
    return RunMetrics(
        overall=group(all_mask),
        mainline=group(origin == Lane.MAINLINE.code),
        ramp=group(origin == Lane.RAMP.code),
    )


def ramp_crossing_times(log: dict[str, np.ndarray], trigger_point: float) -> np.ndarray:
    """First time each ramp-origin vehicle reached the trigger line."""
    ids = log["id"]
    if len(ids) == 0:
        return np.empty(0)
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    sorted_pos = log["position"][order]
    sorted_lane = log["lane"][order]
    sorted_t = log["t"][order]
    uniq, starts = np.unique(sorted_ids, return_index=True)
    bounds = np.append(starts, len(sorted_ids))
    out = []
    for i in range(len(uniq)):
        s, e = bounds[i], bounds[i + 1]
        if sorted_lane[s] != Lane.RAMP.code:
            continue
        past = np.nonzero(sorted_pos[s:e] >= trigger_point)[0]
        if len(past):
            out.append(sorted_t[s + past[0]])
    return np.sort(np.asarray(out))


@dataclass
class SimCounters:
    arrived: int = 0
    spawned: int = 0
    exited: int = 0
    coordinator_commands: int = 0
    envelope_interventions: int = 0
    forced_merges: int = 0
    meter_releases: int = 0
    degraded_plans: int = 0


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: RunMetrics
    log: dict[str, np.ndarray]
    counters: SimCounters
    final_vehicle_count: int
    coordinator: MergeCoordinator | None = None


class _World:
    """Structure-of-arrays vehicle population."""

    def __init__(self) -> None:
        self.ids = np.empty(0, dtype=np.int64)
        self.lane = np.empty(0, dtype=np.int64)
        self.origin = np.empty(0, dtype=np.int64)
        self.pos = np.empty(0)
        self.v = np.empty(0)
        self.entry = np.empty(0)
        self.stand = np.empty(0)
        self.released = np.empty(0, dtype=bool)

    def __len__(self) -> int:
        return len(self.ids)

    def add(self, vid: int, lane_code: int, pos: float, speed: float) -> None:
        self.ids = np.append(self.ids, vid)
        self.lane = np.append(self.lane, lane_code)
        self.origin = np.append(self.origin, lane_code)
        self.pos = np.append(self.pos, pos)
        self.v = np.append(self.v, speed)
        self.entry = np.append(self.entry, np.nan)
        self.stand = np.append(self.stand, 0.0)
        self.released = np.append(self.released, False)

    def remove(self, mask: np.ndarray) -> None:
        keep = ~mask
        self.ids = self.ids[keep]
        self.lane = self.lane[keep]
        self.origin = self.origin[keep]
        self.pos = self.pos[keep]
        self.v = self.v[keep]
        self.entry = self.entry[keep]
        self.stand = self.stand[keep]
        self.released = self.released[keep]

    def chain(self, lane_code: int) -> np.ndarray:
        idx = np.nonzero(self.lane == lane_code)[0]
        return idx[np.argsort(-self.pos[idx], kind="stable")]


def _safe_entry_speed(v_pred: float, net_gap: float, params: IdmParams) -> float:
    """Fastest spawn speed from which comfortable braking matches the
    predecessor within the available gap."""
    usable = max(net_gap - params.s0, 0.0)
    return math.sqrt(max(v_pred, 0.0) ** 2 + 2.0 * params.b * usable)

def _insertion_neighbors(world: _World, pos: float):
    """Nearest mainline vehicles around an axis position."""
    main = np.nonzero(world.lane == Lane.MAINLINE.code)[0]
    lead = lag = -1
    lead_pos = math.inf
    lag_pos = -math.inf
    for j in main:
        p = world.pos[j]
        if p >= pos and p < lead_pos:
            lead, lead_pos = int(j), p
        elif p < pos and p > lag_pos:
            lag, lag_pos = int(j), p
    return lead, lag


def _forced_gap(closing: float) -> float:
    # smallest gap the pushed party can honor with hard braking
    rel = max(closing, 0.0)
    return max(1.0, 0.3 * rel + rel * rel / (2.0 * abs(HARD_BRAKE))) + 1.0


def run_scenario(config: ScenarioConfig) -> RunResult:
    config.validate()
    geo = config.geometry
    limits = config.limits
    dt = config.dt
    L = config.vehicle_length
    rng = np.random.default_rng(config.seed)

    # arrival schedules: per-phase draws, then one pass to keep the
    # minimum headway across phase boundaries too
    def lane_arrivals(rate_of) -> np.ndarray:
        pieces = []
        t0 = 0.0
        for phase in config.phases:
            pieces.append(generate_arrivals(
                rate_of(phase), phase.duration, rng,
                min_headway=config.arrival_min_headway, t0=t0,
            ))
            t0 += phase.duration
        merged = np.concatenate(pieces) if pieces else np.empty(0)
        kept = []
        prev = -math.inf
        for raw in merged:
            tt = max(float(raw), prev + config.arrival_min_headway)
            if tt >= config.total_duration:
                break
            kept.append(tt)
            prev = tt
        return np.asarray(kept)

    main_arrivals = lane_arrivals(lambda p: p.mainline_rate)
    ramp_arrivals = lane_arrivals(lambda p: p.ramp_rate)
    arrival_ptr = {Lane.MAINLINE.code: 0, Lane.RAMP.code: 0}
    arrival_times = {Lane.MAINLINE.code: main_arrivals, Lane.RAMP.code: ramp_arrivals}
    entry_pos = {
        Lane.MAINLINE.code: -geo.upstream_extent,
        Lane.RAMP.code: -geo.ramp_length,
    }
    lane_params = {
        Lane.MAINLINE.code: config.mainline_idm,
        Lane.RAMP.code: config.ramp_idm,
    }

    world = _World()
    log = TrajectoryLog()
    counters = SimCounters(arrived=len(main_arrivals) + len(ramp_arrivals))
    coordinator = None
    if config.mode is ControlMode.OPTIMAL:
        coordinator = MergeCoordinator(geo, limits, config.scoring, config.ramp_idm)
    # emergency backstop for commanded vehicles: reaction-margin headway
    # far below any planned gap, so it binds only when a plan goes stale
    envelope_idm = IdmParams(v0=limits.v_max, T=0.3, a=2.0, b=4.0, s0=2.0)
    # second tier for stalled traffic ahead: the tight envelope engages
    # too late for a cruise-speed approach to a stopped string (physics
    # caps braking at HARD_BRAKE), so against a near-stopped predecessor
    # a commanded vehicle must brake like a driver, from far out
    stall_guard_idm = IdmParams(v0=limits.v_max, T=1.0, a=2.0, b=2.0, s0=2.0)
    meter_next_green = 0.0
    # under coordination the advisory rate is broadcast upstream, so
    # excess ramp demand waits off-network at the entrance instead of
    # stacking up inside the corridor
    ramp_entry_release = -math.inf
    next_id = 0

    merge_bar = geo.merge_zone_end - MERGE_STOP_SETBACK
    steps = int(round(config.total_duration / dt))

    for k in range(steps):
        t = k * dt
        phase = config.phase_at(t)

        # ---- spawn what the entrances can take, in arrival order
        for lane_code in (Lane.MAINLINE.code, Lane.RAMP.code):
            times = arrival_times[lane_code]
            params = lane_params[lane_code]
            while arrival_ptr[lane_code] < len(times) and times[arrival_ptr[lane_code]] <= t:
                if (
                    config.mode is ControlMode.OPTIMAL
                    and lane_code == Lane.RAMP.code
                    and t < ramp_entry_release
                ):
                    break  # advisory pacing: demand above it queues off-network
                e_pos = entry_pos[lane_code]
                chain = np.nonzero(world.lane == lane_code)[0]
                v_spawn = params.v0
                if len(chain):
                    rear = chain[np.argmin(world.pos[chain])]
                    net = world.pos[rear] - e_pos - L
                    if net < SPAWN_CLEARANCE:
                        break  # entrance blocked; arrival waits off-network
                    v_spawn = min(
                        params.v0,
                        _safe_entry_speed(float(world.v[rear]), net, params),
                    )
                world.add(next_id, lane_code, e_pos, v_spawn)
                next_id += 1
                counters.spawned += 1
                arrival_ptr[lane_code] += 1
                if config.mode is ControlMode.OPTIMAL and lane_code == Lane.RAMP.code:
                    ramp_entry_release = t + 1.0 / phase.q_suggested

        n = len(world)
        if n == 0:
            continue

        # ---- record ramp buffer-entry speeds
        crossed = (
            (world.lane == Lane.RAMP.code)
            & np.isnan(world.entry)
            & (world.pos >= geo.ramp_buffer_start)
        )
        world.entry[crossed] = world.v[crossed]

        # ---- base IDM accelerations along each lane chain
        acc = np.empty(n)
        gap_all = np.full(n, np.inf)
        dv_all = np.zeros(n)
        chains = {}
        for lane_code in (Lane.MAINLINE.code, Lane.RAMP.code):
            order = world.chain(lane_code)
            chains[lane_code] = order
            if len(order) == 0:
                continue
            gaps = np.full(len(order), np.inf)
            dvs = np.zeros(len(order))
            if len(order) > 1:
                gaps[1:] = world.pos[order[:-1]] - world.pos[order[1:]] - L
                dvs[1:] = world.v[order[1:]] - world.v[order[:-1]]
            gap_all[order] = gaps
            dv_all[order] = dvs
            acc[order] = idm_accel(
                world.v[order], np.maximum(gaps, 1e-3), dvs, lane_params[lane_code]
            )

        # acceleration-lane behavior: an uncontrolled ramp vehicle close
        # to the merge drives to mainline norms while hunting for a slot
        accel_lane = np.nonzero(
            (world.lane == Lane.RAMP.code) & (world.pos >= ACCEL_LANE_START)
        )[0]
        if len(accel_lane):
            acc[accel_lane] = idm_accel(
                world.v[accel_lane],
                np.maximum(gap_all[accel_lane], 1e-3),
                dv_all[accel_lane],
                config.mainline_idm,
            )

        active_ids: set[int] = set()
        leader_id = None

        # ---- mode layer
        if config.mode is ControlMode.OPTIMAL:
            snap = WorldSnapshot(
                t=t,
                q_mainline=phase.mainline_rate,
                q_suggested=phase.q_suggested,
                ids=world.ids,
                lanes=world.lane,
                positions=world.pos,
                speeds=world.v,
                entry_speeds=world.entry,
            )
            commands = coordinator.step(snap)
            counters.coordinator_commands += len(commands)
            active_ids = coordinator.active_member_ids
            leader_id = coordinator.regulated_leader
            id_to_idx = {int(v): i for i, v in enumerate(world.ids)}
            # predecessor map for the safety envelope
            pred_of = np.full(n, -1, dtype=int)
            for order in chains.values():
                pred_of[order[1:]] = order[:-1]
            for vid, u in commands.items():
                i = id_to_idx[vid]
                j = pred_of[i]
                if j >= 0:
                    net = world.pos[j] - world.pos[i] - L
                    guard = idm_accel(
                        world.v[i],
                        max(net, 1e-3),
                        world.v[i] - world.v[j],
                        envelope_idm,
                    )
                    # emergency only: the guard must itself demand braking
                    # and demand more of it than the plan already applies.
                    # No deadband: near standstill even a mildly negative
                    # guard must win, or the vehicle creeps through the
                    # envelope's standstill floor a step at a time
                    if world.v[j] < STALL_SPEED:
                        soft = idm_accel(
                            world.v[i],
                            max(net, 1e-3),
                            world.v[i] - world.v[j],
                            stall_guard_idm,
                        )
                        guard = min(guard, soft)
                    if guard < 0.0 and guard < u:
                        u = guard
                        counters.envelope_interventions += 1
                acc[i] = u
        elif config.mode is ControlMode.METERING:
            # hold the first unreleased vehicle at the stop bar
            order = chains[Lane.RAMP.code]
            for j in order:
                if world.pos[j] >= METERING_BAR:
                    continue
                if not world.released[j]:
                    gap = METERING_BAR - world.pos[j]
                    standing = gap <= 12.0 and world.v[j] <= 0.5
                    if standing and t >= meter_next_green:
                        world.released[j] = True
                        counters.meter_releases += 1
                        meter_next_green = t + 1.0 / phase.q_suggested
                    else:
                        hold = idm_accel(
                            world.v[j], max(gap, 1e-3), world.v[j],
                            config.ramp_idm,
                        )
                        acc[j] = min(acc[j], hold)
                    break

        # ---- unmerged ramp vehicles must not run off the lane end
        order = chains[Lane.RAMP.code]
        for j in order:
            if world.pos[j] >= merge_bar:
                continue  # past the stop point; the transfer logic owns it
            if config.mode is ControlMode.METERING and not world.released[j]:
                break  # still held upstream at the metering bar
            vid = int(world.ids[j])
            if vid in active_ids or vid == leader_id:
                # a planned merge deferred this long is an anomaly: stop
                # at the bar instead of overriding the plan early
                if world.pos[j] > merge_bar - 25.0:
                    hold = idm_accel(
                        world.v[j],
                        max(merge_bar - world.pos[j], 1e-3),
                        world.v[j],
                        envelope_idm,
                    )
                    acc[j] = min(acc[j], hold)
            else:
                hold = idm_accel(
                    world.v[j],
                    max(merge_bar - world.pos[j], 1e-3),
                    world.v[j],
                    config.ramp_idm,
                )
                acc[j] = min(acc[j], hold)
            break

        # ---- integrate
        acc = np.clip(acc, HARD_BRAKE, limits.acc_max)
        v_next = np.clip(world.v + acc * dt, 0.0, limits.v_max)
        a_real = (v_next - world.v) / dt
        fuel = fuel_rate(world.v, a_real, config.fuel)

        status = np.zeros(n, dtype=np.int64)
        if active_ids:
            for i, vid in enumerate(world.ids):
                if int(vid) in active_ids:
                    status[i] = ControlStatus.OPTIMAL_CONTROLLED.code
        if leader_id is not None:
            hit = np.nonzero(world.ids == leader_id)[0]
            if len(hit):
                status[hit[0]] = ControlStatus.RAMP_LEADER_REGULATED.code
        merged_mask = (
            (world.origin == Lane.RAMP.code)
            & (world.lane == Lane.MAINLINE.code)
            & (status == 0)
        )
        status[merged_mask] = ControlStatus.MERGED.code

        log.append_step(
            t, world.ids, world.lane, world.pos, world.v, a_real, status, fuel
        )

        world.pos = world.pos + 0.5 * (world.v + v_next) * dt
        world.v = v_next

        # ---- standing timers for pushy insertion
        waiting = (
            (world.lane == Lane.RAMP.code)
            & (world.pos > geo.merge_zone_end - 40.0)
            & (world.v < 0.5)
        )
        world.stand[waiting] += dt
        world.stand[~waiting] = 0.0

        # ---- lane transfers at the merge
        ramp_idx = np.nonzero((world.lane == Lane.RAMP.code) & (world.pos >= 0.0))[0]
        for j in sorted(ramp_idx, key=lambda i: -world.pos[i]):
            vid = int(world.ids[j])
            lead, lag = _insertion_neighbors(world, world.pos[j])
            front = world.pos[lead] - world.pos[j] - L if lead >= 0 else math.inf
            rear = world.pos[j] - world.pos[lag] - L if lag >= 0 else math.inf
            if vid in active_ids:
                # planned merge, but never into a slot the neighbors
                # could not survive with hard braking; an unsafe slot
                # defers the lane change along the acceleration lane
                v_j = world.v[j]
                front_rel = v_j - (world.v[lead] if lead >= 0 else v_j)
                rear_rel = (world.v[lag] if lag >= 0 else v_j) - v_j
                if front >= _forced_gap(front_rel) and rear >= _forced_gap(rear_rel):
                    world.lane[j] = Lane.MAINLINE.code
                continue
            v_j = world.v[j]
            front_ok = front > 0.5 and (
                lead < 0
                or front
                >= v_j * ACCEPT_TAU
                + max(v_j - world.v[lead], 0.0) ** 2 / (2.0 * ACCEPT_YIELD)
            )
            rear_ok = rear > 0.5 and (
                lag < 0
                or rear
                >= world.v[lag] * ACCEPT_TAU
                + max(world.v[lag] - v_j, 0.0) ** 2 / (2.0 * ACCEPT_YIELD)
            )
            if front_ok and rear_ok:
                world.lane[j] = Lane.MAINLINE.code
                continue
            if world.stand[j] >= FORCE_TIMEOUT:
                closing_front = v_j - (world.v[lead] if lead >= 0 else v_j)
                closing_rear = (world.v[lag] if lag >= 0 else 0.0) - v_j
                if front >= _forced_gap(closing_front) and rear >= _forced_gap(
                    closing_rear
                ):
                    world.lane[j] = Lane.MAINLINE.code
                    world.stand[j] = 0.0
                    counters.forced_merges += 1

        # ---- collision audit
        for lane_code in (Lane.MAINLINE.code, Lane.RAMP.code):
            order = world.chain(lane_code)
            if len(order) > 1:
                gaps = world.pos[order[:-1]] - world.pos[order[1:]] - L
                bad = np.nonzero(gaps <= 0.0)[0]
                if len(bad):
                    b = bad[0]
                    raise CollisionError(
                        t,
                        int(world.ids[order[b]]),
                        int(world.ids[order[b + 1]]),
                        float(gaps[b]),
                        log=log.arrays(),
                    )

        # ---- exits
        gone = world.pos > geo.downstream_extent
        if np.any(gone):
            counters.exited += int(np.count_nonzero(gone))
            world.remove(gone)

    if coordinator is not None:
        counters.degraded_plans = sum(
            1 for r in coordinator.records if not r.feasible
        )
    return RunResult(
        config=config,
        metrics=compute_metrics(log.arrays(), dt),
        log=log.arrays(),
        counters=counters,
        final_vehicle_count=len(world),
        coordinator=coordinator,
    )


def _phases(rows: list[tuple[float, float, float, float]]) -> list[DemandPhase]:
    return [
        DemandPhase(
            duration=d,
            mainline_rate=qm / 3600.0,
            ramp_rate=qr / 3600.0,
            q_suggested=qs / 3600.0,
        )
        for d, qm, qr, qs in rows
    ]


def scenario_1(mode: ControlMode = ControlMode.OPTIMAL, seed: int = 0) -> ScenarioConfig:
    """Heavy early ramp demand against a loaded mainline."""
    return ScenarioConfig(
        phases=_phases([
            (600.0, 1600.0, 500.0, 200.0),
            (600.0, 1200.0, 300.0, 600.0),
        ]),
        mode=mode,
        seed=seed,
        name="scenario-1",
    )


def scenario_2(mode: ControlMode = ControlMode.OPTIMAL, seed: int = 0) -> ScenarioConfig:
    """Lighter early ramp demand, heavier late ramp demand."""
    return ScenarioConfig(
        phases=_phases([
            (600.0, 1600.0, 300.0, 200.0),
            (600.0, 1200.0, 500.0, 600.0),
        ]),
        mode=mode,
        seed=seed,
        name="scenario-2",
    )
