"""Decision-cycle coordination of cooperative merging.

The coordinator owns the control loop that turns individual vehicles into
jointly controlled merge strings:

* it watches the ramp for the next *leader* (the first uncontrolled ramp
  vehicle still upstream of the trigger line) and paces that leader so
  ramp inflow never exceeds the suggested rate;
* when the leader crosses the trigger line it opens a *decision cycle*:
  it collects the ramp buffer occupants and a flow-proportional share of
  mainline traffic, picks the cheapest merge order, and freezes gains,
  reference and safety floors into a :class:`ControlSet`;
* every step it issues one acceleration command per controlled vehicle
  from the converged receding-horizon law, watches short-range
  predictions for developing gap violations (re-planning when needed),
  and releases vehicles once they clear the merge zone.

All functions here are pure with respect to the traffic world: the
simulation hands in a :class:`WorldSnapshot` each step and applies the
returned commands itself.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .idm import IdmParams, idm_accel, predict_eta, regulate_leader, PredecessorTrack
from .sequencing import (
    ScoringContext,
    count_sequences,
    optimal_sequence,
    pair_gap_floors,
)
from .statespace import LtiModel, build_model
from .tracking import (
    LqSolution,
    PairGapSpec,
    TrackerWeights,
    build_reference,
    converged_gains,
    solve_with_repair,
    steady_state_feedforward,
    weights_for,
)
from .vehicles import (
    ControlLimits,
    Lane,
    MergeGeometry,
    VehicleState,
)

#: Hard deceleration available to safety interventions (m/s^2).  Comfort
#: limits bound planned commands; holds and last-resort braking may use this.
HARD_BRAKE = -6.0


class SetPhase(Enum):
    FORMING = "forming"
    ACTIVE = "active"
    COMPLETED = "completed"


@dataclass
class WorldSnapshot:
    """Read-only view of the traffic world at one instant.

    Positions live on the shared merge axis.  ``entry_speeds`` carries
    NaN until a vehicle's buffer-entry speed has been recorded.
    ``q_mainline`` and ``q_suggested`` are flows in veh/s.
    """

    t: float
    q_mainline: float
    q_suggested: float
    ids: np.ndarray
    lanes: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray
    entry_speeds: np.ndarray

    def __post_init__(self) -> None:
        self._index = {int(v): i for i, v in enumerate(self.ids)}

    def index_of(self, vehicle_id: int) -> int:
        return self._index[vehicle_id]

    def has(self, vehicle_id: int) -> bool:
        return vehicle_id in self._index

    def ordered(self, lane: Lane) -> np.ndarray:
        """Indices of the lane's vehicles, downstream first."""
        mask = self.lanes == lane.code
        idx = np.nonzero(mask)[0]
        return idx[np.argsort(-self.positions[idx], kind="stable")]

    def state_of(self, idx: int) -> VehicleState:
        entry = self.entry_speeds[idx]
        return VehicleState(
            id=int(self.ids[idx]),
            lane=Lane.from_code(int(self.lanes[idx])),
            position=float(self.positions[idx]),
            speed=float(self.speeds[idx]),
            entry_speed=None if math.isnan(entry) else float(entry),
        )


def mainline_buffer_length(
    q_mainline: float,
    q_suggested: float,
    n_ramp: int,
    density: float,
    lower: float = 50.0,
    upper: float = 1000.0,
) -> float:
    """Roadway length holding the mainline's flow-proportional share.

    For every ramp vehicle admitted, the mainline contributes
    ``q_mainline / q_suggested`` partners; dividing that vehicle count by
    the measured density converts it to meters.  Clamped to
    ``[lower, upper]``; a zero density (empty road) clamps high.
    """
    if q_suggested <= 0.0:
        raise ValueError("q_suggested must be positive")
    if density <= 0.0:
        return upper
    length = (q_mainline / q_suggested) * n_ramp / density
    return float(min(max(length, lower), upper))


def proper_arrival_time(n_ramp_prev: int, q_suggested: float) -> float:
    """Earliest admissible headway to the next cycle's leader (s).

    The previous cycle admitted ``n_ramp_prev`` ramp vehicles; at the
    suggested rate they occupy ``n / q`` seconds of ramp inflow, so the
    next leader may not cross before that much time has passed.
    """
    if q_suggested <= 0.0:
        raise ValueError("q_suggested must be positive")
    if n_ramp_prev < 0:
        raise ValueError("n_ramp_prev must be nonnegative")
    return n_ramp_prev / q_suggested


def inflow_group_cap(
    q_suggested: float,
    window: float = 300.0,
    tolerance: float = 0.05,
) -> int:
    """Largest admission burst that keeps every rolling window compliant.

    Admitting ``n`` vehicles at once and then holding the next leader for
    ``n / q`` seconds realizes the suggested rate on average, but a
    rolling window of length ``W`` can still catch one unpaid burst at
    its edge: worst case it sees ``W * q + n`` vehicles.  Keeping the
    overshoot within ``tolerance * W * q`` bounds the burst size; at
    least one vehicle must always be admissible.
    """
    return max(1, math.floor(tolerance * q_suggested * window))


def find_ramp_leader(
    ordered_ids: np.ndarray,
    ordered_positions: np.ndarray,
    controlled: set[int],
    trigger_point: float,
) -> int | None:
    """Pick the next leader from the downstream-first ramp queue.

    The leader is the first vehicle that (a) has never been controlled,
    (b) sits behind every controlled ramp vehicle, and (c) has not yet
    crossed the trigger line.  Returns ``None`` when no such vehicle
    exists (empty ramp, or everything already controlled).
    """
    last_controlled = -1
    for i, vid in enumerate(ordered_ids):
        if int(vid) in controlled:
            last_controlled = i
    for i in range(last_controlled + 1, len(ordered_ids)):
        vid = int(ordered_ids[i])
        if vid in controlled:
            continue
        if ordered_positions[i] < trigger_point:
            return vid
    return None


def travel_time_estimate(
    distance: float,
    speed: float,
    acc_max: float,
    v_target: float,
) -> float:
    """Time to cover ``distance`` accelerating toward ``v_target``."""
    if distance <= 0.0:
        return 0.0
    v = max(speed, 0.0)
    if v >= v_target or acc_max <= 0.0:
        return distance / max(v, 0.1)
    d_accel = (v_target**2 - v**2) / (2.0 * acc_max)
    if d_accel >= distance:
        return (-v + math.sqrt(v**2 + 2.0 * acc_max * distance)) / acc_max
    return (v_target - v) / acc_max + (distance - d_accel) / v_target


@dataclass
class ControlSet:
    """One decision cycle's frozen plan and live controller state."""

    cycle_id: int
    ids: tuple[int, ...]
    lanes: tuple[Lane, ...]
    model: LtiModel
    weights: TrackerWeights
    K: np.ndarray
    Ky: np.ndarray
    V_ss: np.ndarray
    r_vec: np.ndarray
    floors: np.ndarray
    specs: list[PairGapSpec]
    created_t: float
    phase: SetPhase = SetPhase.FORMING
    repair: LqSolution | None = None
    repair_k: int = 0
    last_repair_t: float = -math.inf

    @property
    def n_members(self) -> int:
        return len(self.ids)


@dataclass
class CycleRecord:
    """Audit entry for one decision cycle."""

    cycle_id: int
    t: float
    leader_id: int
    ramp_ids: tuple[int, ...]
    mainline_ids: tuple[int, ...]
    sequence_ids: tuple[int, ...]
    total_fuel: float
    feasible: bool
    horizon: int
    n_candidates: int
    release_time: float


@dataclass
class InflowState:
    """Pacing state for the admission meter at the trigger line."""

    t_last_trigger: float = -math.inf
    n_ramp_prev: int = 0
    release_time: float = -math.inf


class MergeCoordinator:
    """Runs decision cycles and serves per-step acceleration commands."""

    def __init__(
        self,
        geometry: MergeGeometry,
        limits: ControlLimits,
        scoring: ScoringContext,
        ramp_idm: IdmParams,
        k_p: float = 0.5,
        gate_window: float = 40.0,
        eta_refresh: float = 0.5,
        lookahead_steps: int = 30,
        lookahead_cadence: float = 1.0,
        repair_gap_fraction: float = 0.6,
        repair_cooldown: float = 5.0,
        gains_tol: float = 1e-10,
        density_window: float = 10.0,
        partner_margin: float = 2.0,
        gate_density: float = 0.04,
    ) -> None:
        geometry.validate()
        limits.validate()
        self.geometry = geometry
        self.limits = limits
        self.scoring = scoring
        self.ramp_idm = ramp_idm
        self.k_p = k_p
        self.gate_window = gate_window
        self.eta_refresh = eta_refresh
        self.lookahead_steps = lookahead_steps
        self.lookahead_cadence = lookahead_cadence
        self.repair_gap_fraction = repair_gap_fraction
        self.repair_cooldown = repair_cooldown
        self.gains_tol = gains_tol
        self.density_window = density_window
        self.partner_margin = partner_margin

        self.sets: list[ControlSet] = []
        self.ever_controlled: set[int] = set()
        self.records: list[CycleRecord] = []
        self.events: list[str] = []
        self.inflow = InflowState()
        self._cycle_count = 0
        self._leader_id: int | None = None
        self._leader_regulating = False
        self._eta_cache: tuple[int, float, float] | None = None
        self._density_samples: deque[tuple[float, float]] = deque()
        self._last_lookahead = -math.inf
        # converged gains depend only on the string's lane pattern, and
        # shrinking a string always leaves a suffix of its pattern, so a
        # small cache serves every rebuild
        self._gains_cache: dict[
            tuple[int, ...], tuple[LtiModel, TrackerWeights, np.ndarray, np.ndarray]
        ] = {}

    # -- public view ---------------------------------------------------

    @property
    def active_member_ids(self) -> set[int]:
        out: set[int] = set()
        for s in self.sets:
            if s.phase is SetPhase.ACTIVE:
                out.update(s.ids)
        return out

    @property
    def regulated_leader(self) -> int | None:
        return self._leader_id if self._leader_regulating else None

    # -- main entry ----------------------------------------------------

    def step(self, snap: WorldSnapshot) -> dict[int, float]:
        """Advance one control step; returns accel commands by vehicle id."""
        self._observe_density(snap)
        self._retire_and_shrink(snap)
        self._maybe_trigger(snap)
        commands: dict[int, float] = {}
        commands.update(self._leader_command(snap))
        commands.update(self._set_commands(snap))
        return commands

    # -- density estimate ----------------------------------------------

    def _observe_density(self, snap: WorldSnapshot) -> None:
        zone = self.geometry.mainline_control_zone_len
        on_main = snap.lanes == Lane.MAINLINE.code
        in_zone = on_main & (snap.positions >= -zone) & (snap.positions < 0.0)
        self._density_samples.append((snap.t, float(np.count_nonzero(in_zone)) / zone))
        cutoff = snap.t - self.density_window
        while self._density_samples and self._density_samples[0][0] < cutoff:
            self._density_samples.popleft()

    def _density_estimate(self, snap: WorldSnapshot) -> float:
        if not self._density_samples:
            return snap.q_mainline / max(self.scoring.desired_speed, 1.0)
        return float(np.mean([d for _, d in self._density_samples]))

    # -- leader tracking and the admission gate ------------------------

    def _current_leader(self, snap: WorldSnapshot) -> int | None:
        if self._leader_id is not None:
            if not snap.has(self._leader_id) or self._leader_id in self.ever_controlled:
                self._leader_id = None
        if self._leader_id is None:
            order = snap.ordered(Lane.RAMP)
            self._leader_id = find_ramp_leader(
                snap.ids[order],
                snap.positions[order],
                self.ever_controlled,
                self.geometry.trigger_point,
            )
            self._eta_cache = None
        return self._leader_id

    def _maybe_trigger(self, snap: WorldSnapshot) -> None:
        """Open a cycle when the downstream-most uncontrolled ramp
        vehicle has crossed the trigger line (at most one per step)."""
        for idx in snap.ordered(Lane.RAMP):
            vid = int(snap.ids[idx])
            if vid in self.ever_controlled:
                continue
            if snap.positions[idx] >= self.geometry.trigger_point:
                self._on_trigger(vid, snap)
                self._leader_id = None
                self._leader_regulating = False
            return

    def _leader_command(self, snap: WorldSnapshot) -> dict[int, float]:
        """Pace the pending leader toward its admission time.

        Two layers: proportional speed pacing toward an on-time arrival,
        and a hard hold just upstream of the trigger line that a leader
        cannot pass before its release time.  The hold is what guarantees
        consecutive cycles stay separated by the proper arrival time.
        """
        self._leader_regulating = False
        leader = self._current_leader(snap)
        if leader is None:
            return {}
        idx = snap.index_of(leader)
        pos = float(snap.positions[idx])
        v = float(snap.speeds[idx])
        trigger = self.geometry.trigger_point
        distance = trigger - pos
        if distance <= 0.0:
            return {}
        remaining = self.inflow.release_time - snap.t

        # IDM fallback toward the actual ramp predecessor
        order = snap.ordered(Lane.RAMP)
        pred_idx = -1
        for j in order:
            if snap.positions[j] > pos:
                pred_idx = int(j)
            else:
                break
        if pred_idx >= 0:
            gap = float(snap.positions[pred_idx] - pos) - self.scoring.vehicle_length
            dv = v - float(snap.speeds[pred_idx])
            idm_now = idm_accel(v, max(gap, 0.1), dv, self.ramp_idm)
        else:
            idm_now = idm_accel(v, math.inf, 0.0, self.ramp_idm)

        command = idm_now
        if remaining > 0.0:
            eta = self._leader_eta(snap, leader, idx, pred_idx, remaining)
            state = snap.state_of(idx)
            command, regulating = regulate_leader(
                state, idm_now, distance, remaining, eta,
                k_p=self.k_p, limits=self.limits,
            )
            self._leader_regulating = regulating
            # hard hold: do not let an early leader reach the line
            if distance <= self.gate_window:
                stop_dist = max(distance - 0.5, 0.3)
                hold = -(v * v) / (2.0 * stop_dist)
                if hold < command:
                    command = max(hold, HARD_BRAKE)
                    self._leader_regulating = True
        if not self._leader_regulating:
            return {}
        return {leader: float(command)}

    def _leader_eta(
        self,
        snap: WorldSnapshot,
        leader: int,
        idx: int,
        pred_idx: int,
        remaining: float,
    ) -> float:
        """Predicted unregulated arrival at the trigger, cached briefly."""
        if self._eta_cache is not None:
            cached_id, cached_t, cached_eta = self._eta_cache
            if cached_id == leader and snap.t - cached_t < self.eta_refresh:
                return max(cached_eta - (snap.t - cached_t), 0.0)
        state = snap.state_of(idx)
        track = None
        if pred_idx >= 0:
            track = PredecessorTrack(
                positions=np.array([float(snap.positions[pred_idx])]),
                speeds=np.array([float(snap.speeds[pred_idx])]),
            )
        eta = predict_eta(
            state,
            self.geometry.trigger_point,
            self.ramp_idm,
            dt=self.scoring.dt,
            predecessor=track,
            vehicle_length=self.scoring.vehicle_length,
            max_time=min(remaining + 1.0, 300.0),
        )
        self._eta_cache = (leader, snap.t, eta)
        return eta

    # -- decision cycle ------------------------------------------------

    def _controller_for(
        self, lanes: tuple[Lane, ...]
    ) -> tuple[LtiModel, TrackerWeights, np.ndarray, np.ndarray]:
        key = tuple(lane.code for lane in lanes)
        hit = self._gains_cache.get(key)
        if hit is not None:
            return hit
        model = build_model(len(lanes), self.scoring.dt)
        weights = weights_for(
            lanes,
            gap_weight_mainline=self.scoring.gap_weight_mainline,
            gap_weight_ramp=self.scoring.gap_weight_ramp,
            speed_weight_mainline=self.scoring.speed_weight_mainline,
            speed_weight_ramp=self.scoring.speed_weight_ramp,
            control_weight=self.scoring.control_weight,
            terminal_factor=self.scoring.terminal_factor,
        )
        K, Ky = converged_gains(model, weights, tol=self.gains_tol)
        entry = (model, weights, K, Ky)
        self._gains_cache[key] = entry
        return entry

    def _collect_ramp_members(self, leader: int, snap: WorldSnapshot) -> list[int]:
        cap = inflow_group_cap(snap.q_suggested)
        members = [leader]
        order = snap.ordered(Lane.RAMP)
        leader_pos = snap.positions[snap.index_of(leader)]
        for idx in order:
            vid = int(snap.ids[idx])
            pos = snap.positions[idx]
            if vid == leader or vid in self.ever_controlled:
                continue
            if pos >= leader_pos:
                continue
            if pos < self.geometry.ramp_buffer_start:
                break
            if len(members) >= cap:
                break
            members.append(vid)
        return members

    def _collect_mainline_members(
        self, ramp_members: list[int], snap: WorldSnapshot
    ) -> list[int]:
        """Mainline vehicles that will share the merge with this group.

        Selection is by predicted arrival time at each vehicle's own
        speed: anything reaching the merge between just before the ramp
        leader and one buffer span after the ramp tail gets planned.
        Time alignment matters because a slowed mainline vehicle that a
        pure distance window would skip does not clear the merge before
        the group arrives.
        """
        v_des = self.scoring.desired_speed
        zone = self.geometry.mainline_control_zone_len

        def group_eta(vid: int) -> float:
            idx = snap.index_of(vid)
            return travel_time_estimate(
                -float(snap.positions[idx]),
                float(snap.speeds[idx]),
                self.limits.acc_max,
                v_des,
            )

        leader_eta = group_eta(ramp_members[0])
        tail_eta = group_eta(ramp_members[-1])
        length = mainline_buffer_length(
            snap.q_mainline,
            snap.q_suggested,
            len(ramp_members),
            self._density_estimate(snap),
            upper=zone,
        )
        lo = max(leader_eta - self.partner_margin, 0.0)
        hi = tail_eta + self.scoring.desired_time_headway + length / v_des
        out: list[int] = []
        for idx in snap.ordered(Lane.MAINLINE):
            vid = int(snap.ids[idx])
            pos = float(snap.positions[idx])
            if pos >= self.scoring.merge_entry:
                continue
            if pos < -zone:
                break
            # constant-speed estimate: pessimistic for vehicles still
            # recovering speed, which keeps them inside the window
            eta = (self.scoring.merge_entry - pos) / min(
                max(float(snap.speeds[idx]), 3.0), v_des
            )
            if vid in self.ever_controlled:
                if out:
                    break  # never span an active string
                continue
            if eta < lo:
                continue
            if eta > hi:
                break
            out.append(vid)
        return out

    def _on_trigger(self, leader: int, snap: WorldSnapshot) -> None:
        ramp_ids = self._collect_ramp_members(leader, snap)
        main_ids = self._collect_mainline_members(ramp_ids, snap)
        # enumeration budget: shed upstream ramp vehicles first (they can
        # lead the next cycle), then upstream mainline vehicles
        while count_sequences(len(main_ids), len(ramp_ids)) > self.scoring.cap:
            if len(ramp_ids) > 1:
                dropped = ramp_ids.pop()
                self.events.append(
                    f"t={snap.t:.1f} cycle {self._cycle_count}: enumeration cap, "
                    f"dropped ramp vehicle {dropped}"
                )
            elif main_ids:
                dropped = main_ids.pop()
                self.events.append(
                    f"t={snap.t:.1f} cycle {self._cycle_count}: enumeration cap, "
                    f"dropped mainline vehicle {dropped}"
                )
            else:  # pragma: no cover - cap >= 1 admits a single vehicle
                break

        states = {}
        for vid in ramp_ids + main_ids:
            idx = snap.index_of(vid)
            st = snap.state_of(idx)
            if st.entry_speed is None:
                st.entry_speed = st.speed
            states[vid] = st

        best = optimal_sequence(main_ids, ramp_ids, states, self.scoring)
        seq = best.sequence
        n = len(seq)

        model, weights, K, Ky = self._controller_for(seq.lanes)
        floors = pair_gap_floors(seq, states, self.limits)
        ref = build_reference(
            n, floors, self.scoring.desired_speed,
            self.scoring.desired_time_headway, self.scoring.vehicle_length, 1,
        )
        r_vec = ref.r[0]
        V_ss = steady_state_feedforward(model, weights, K, r_vec)
        specs = [
            PairGapSpec(
                min_net_gap=float(floors[i]),
                cross_lane=seq.lanes[i] is not seq.lanes[i + 1],
            )
            for i in range(n - 1)
        ]
        cset = ControlSet(
            cycle_id=self._cycle_count,
            ids=seq.ids,
            lanes=seq.lanes,
            model=model,
            weights=weights,
            K=K,
            Ky=Ky,
            V_ss=V_ss,
            r_vec=r_vec,
            floors=floors,
            specs=specs,
            created_t=snap.t,
        )
        cset.phase = SetPhase.ACTIVE
        self.sets.append(cset)
        self.ever_controlled.update(seq.ids)

        t_proper = proper_arrival_time(len(ramp_ids), snap.q_suggested)
        self.records.append(
            CycleRecord(
                cycle_id=self._cycle_count,
                t=snap.t,
                leader_id=leader,
                ramp_ids=tuple(ramp_ids),
                mainline_ids=tuple(main_ids),
                sequence_ids=seq.ids,
                total_fuel=best.total_fuel,
                feasible=best.feasible,
                horizon=best.horizon,
                n_candidates=count_sequences(len(main_ids), len(ramp_ids)),
                release_time=snap.t + t_proper,
            )
        )
        if not best.feasible:
            self.events.append(
                f"t={snap.t:.1f} cycle {self._cycle_count}: degraded plan "
                f"(horizon {best.horizon})"
            )
        self.inflow = InflowState(
            t_last_trigger=snap.t,
            n_ramp_prev=len(ramp_ids),
            release_time=snap.t + t_proper,
        )
        self._cycle_count += 1

    # -- releases ------------------------------------------------------

    def _retire_and_shrink(self, snap: WorldSnapshot) -> None:
        end = self.geometry.merge_zone_end
        for cset in self.sets:
            if cset.phase is not SetPhase.ACTIVE:
                continue
            changed = False
            while cset.ids:
                front = cset.ids[0]
                if not snap.has(front):
                    pass  # exited the network entirely
                elif snap.positions[snap.index_of(front)] < end:
                    break
                cset.ids = cset.ids[1:]
                cset.lanes = cset.lanes[1:]
                cset.floors = cset.floors[1:]
                cset.specs = cset.specs[1:]
                changed = True
            if not cset.ids:
                cset.phase = SetPhase.COMPLETED
                continue
            if changed:
                self._rebuild_set(cset)

    def _rebuild_set(self, cset: ControlSet) -> None:
        """Refit the controller after the front of the string released."""
        n = len(cset.ids)
        model, weights, K, Ky = self._controller_for(cset.lanes)
        ref = build_reference(
            n, cset.floors, self.scoring.desired_speed,
            self.scoring.desired_time_headway, self.scoring.vehicle_length, 1,
        )
        r_vec = ref.r[0]
        cset.model = model
        cset.weights = weights
        cset.K = K
        cset.Ky = Ky
        cset.V_ss = steady_state_feedforward(model, weights, K, r_vec)
        cset.r_vec = r_vec
        cset.repair = None
        cset.repair_k = 0

    # -- per-step commands ---------------------------------------------

    def _assemble_state(self, cset: ControlSet, snap: WorldSnapshot) -> np.ndarray:
        n = len(cset.ids)
        x = np.empty(2 * n)
        for i, vid in enumerate(cset.ids):
            idx = snap.index_of(vid)
            x[i] = snap.positions[idx]
            x[n + i] = snap.speeds[idx]
        return x

    def _set_commands(self, snap: WorldSnapshot) -> dict[int, float]:
        commands: dict[int, float] = {}
        run_lookahead = (
            snap.t - self._last_lookahead >= self.lookahead_cadence - 1e-9
        )
        if run_lookahead:
            self._last_lookahead = snap.t
        for cset in self.sets:
            if cset.phase is not SetPhase.ACTIVE:
                continue
            x = self._assemble_state(cset, snap)
            if cset.repair is not None:
                k = cset.repair_k
                if k >= cset.repair.horizon:
                    cset.repair = None
                else:
                    u = cset.repair.control(k, x)
                    cset.repair_k += 1
            if cset.repair is None:
                u = -cset.K @ x + cset.Ky @ cset.V_ss
                if run_lookahead and len(cset.ids) > 1:
                    self._check_prediction(cset, x, snap)
                    if cset.repair is not None:
                        u = cset.repair.control(0, x)
                        cset.repair_k = 1
            u = np.clip(u, self.limits.acc_min, self.limits.acc_max)
            for i, vid in enumerate(cset.ids):
                commands[vid] = float(u[i])
        return commands

    def _check_prediction(
        self, cset: ControlSet, x: np.ndarray, snap: WorldSnapshot
    ) -> None:
        """Re-plan when the short-range forecast shows a developing breach."""
        if snap.t - cset.last_repair_t < self.repair_cooldown:
            return
        n = len(cset.ids)
        dt = cset.model.dt
        L = self.scoring.vehicle_length
        floors = cset.floors
        # quick screen: comfortably formed strings skip the rollout
        gaps_now = (x[:n - 1] - x[1:n]) - L
        margin = self.repair_gap_fraction * floors
        active_now = np.array([
            (not cset.specs[i].cross_lane)
            or x[i + 1] >= self.scoring.merge_entry - self.scoring.activation_margin
            for i in range(n - 1)
        ])
        if not np.any(active_now & (gaps_now < 1.5 * floors)):
            return
        xp = x.copy()
        for _ in range(self.lookahead_steps):
            u = np.clip(
                -cset.K @ xp + cset.Ky @ cset.V_ss,
                self.limits.acc_min,
                self.limits.acc_max,
            )
            v = xp[n:]
            v_next = np.clip(v + dt * u, 0.0, self.limits.v_max)
            xp = np.concatenate([xp[:n] + 0.5 * dt * (v + v_next), v_next])
            gaps = (xp[: n - 1] - xp[1:n]) - L
            for i in range(n - 1):
                if not cset.specs[i].cross_lane or (
                    xp[i + 1]
                    >= self.scoring.merge_entry - self.scoring.activation_margin
                ):
                    if gaps[i] < margin[i]:
                        self._repair_set(cset, x, snap)
                        return

    def _repair_set(
        self, cset: ControlSet, x: np.ndarray, snap: WorldSnapshot
    ) -> None:
        result = solve_with_repair(
            cset.model,
            cset.weights,
            cset.r_vec,
            x,
            self.limits,
            cset.specs,
            self.scoring.vehicle_length,
            horizon=self.scoring.horizon,
            merge_entry=self.scoring.merge_entry,
            activation_margin=self.scoring.activation_margin,
            growth=self.scoring.horizon_growth,
            max_horizon=self.scoring.max_horizon,
        )
        cset.repair = result.solution
        cset.repair_k = 0
        cset.last_repair_t = snap.t
        self.events.append(
            f"t={snap.t:.1f} cycle {cset.cycle_id}: predicted gap breach, "
            f"re-planned over horizon {result.horizon}"
            + (" (degraded)" if result.degraded else "")
        )
