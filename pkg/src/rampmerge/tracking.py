"""Finite-horizon LQ tracking for vehicle strings.

Solves the discrete-time tracking problem

    min  sum_{k=0}^{N-1} [ (y_k - r_k)' Q (y_k - r_k) + u_k' R u_k ]
                + (y_N - r_N)' Q_N (y_N - r_N),    y_k = C x_k

by backward Riccati recursion with terminal conditions S_N = C' Q_N C and
V_N = C' Q_N r_N:

    M_k   = (R + B' S_{k+1} B)^{-1}
    K_k   = M_k B' S_{k+1} A
    Ky_k  = M_k B'
    S_k   = C' Q C + A' S_{k+1} (A - B K_k)
    V_k   = (A - B K_k)' V_{k+1} + C' Q r_k

The optimal control applies the feedback gain against the current state
and the feedforward gain against the next-step costate:

    u_k = -K_k x_k + Ky_k V_{k+1}

Receding-horizon use relies on the backward recursion converging to
constant gains, computed here by fixed-point iteration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statespace import LtiModel
from .vehicles import ControlLimits, Lane


@dataclass(frozen=True)
class TrackerWeights:
    """Diagonal output weights, input weight, and terminal output weight."""

    Q: np.ndarray    # (2n-1, 2n-1)
    R: np.ndarray    # (n, n)
    Q_N: np.ndarray  # (2n-1, 2n-1)


def weights_for(
    lanes: tuple[Lane, ...],
    gap_weight_mainline: float = 1.0,
    gap_weight_ramp: float = 2.0,
    speed_weight_mainline: float = 0.5,
    speed_weight_ramp: float = 1.0,
    control_weight: float = 1.0,
    terminal_factor: float = 10.0,
) -> TrackerWeights:
    """Expand per-lane scalar weights into the diagonal weight matrices.

    Each gap row is weighted by the lane of its follower (the vehicle
    that has to close the gap); each speed row by the vehicle's own lane.
    """
    n = len(lanes)
    if n < 1:
        raise ValueError("need at least one vehicle")
    gap_w = [
        gap_weight_ramp if lanes[i + 1] is Lane.RAMP else gap_weight_mainline
        for i in range(n - 1)
    ]
    speed_w = [
        speed_weight_ramp if lane is Lane.RAMP else speed_weight_mainline
        for lane in lanes
    ]
    Q = np.diag(np.array(gap_w + speed_w, dtype=float))
    return TrackerWeights(Q=Q, R=control_weight * np.eye(n), Q_N=terminal_factor * Q)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Output reference, one row per step including the terminal step."""

    r: np.ndarray  # (N+1, 2n-1)

    @property
    def horizon(self) -> int:
        return self.r.shape[0] - 1


def constant_reference(r_vec: np.ndarray, horizon: int) -> ReferenceTrajectory:
    r_vec = np.asarray(r_vec, dtype=float)
    return ReferenceTrajectory(r=np.tile(r_vec, (horizon + 1, 1)))


def build_reference(
    n: int,
    pair_gap_min: np.ndarray,
    desired_speed: float,
    desired_time_headway: float,
    vehicle_length: float,
    horizon: int,
    gap_margin: float = 0.5,
) -> ReferenceTrajectory:
    """Constant reference: uniform desired speed and safe desired gaps.

    Desired position differences combine the vehicle length with the
    larger of each pair's padded minimum net gap and the desired time
    headway at the target speed.  The pad keeps the settle point strictly
    inside the feasible set; without it the loop converges onto the floor
    itself and its transient undershoot reads as a violation.
    """
    pair_gap_min = np.asarray(pair_gap_min, dtype=float)
    if pair_gap_min.shape != (n - 1,):
        raise ValueError(f"expected {n - 1} pairwise gap floors, got {pair_gap_min.shape}")
    gaps = vehicle_length + np.maximum(
        pair_gap_min + gap_margin, desired_time_headway * desired_speed
    )
    r_vec = np.concatenate([gaps, np.full(n, desired_speed)])
    return constant_reference(r_vec, horizon)


@dataclass
class LqSolution:
    """Backward-recursion products over one horizon."""

    K: np.ndarray    # (N, n, 2n)   feedback gains
    Ky: np.ndarray   # (N, n, 2n)   feedforward gains
    S: np.ndarray    # (N+1, 2n, 2n) cost-to-go quadratic terms
    V: np.ndarray    # (N+1, 2n)    cost-to-go linear terms

    @property
    def horizon(self) -> int:
        return self.K.shape[0]

    def control(self, k: int, x: np.ndarray) -> np.ndarray:
        """Optimal input at step ``k`` from state ``x``."""
        return -self.K[k] @ x + self.Ky[k] @ self.V[k + 1]


def solve_finite_horizon(
    model: LtiModel,
    weights: TrackerWeights,
    ref: ReferenceTrajectory,
    horizon: int | None = None,
) -> LqSolution:
    """Backward Riccati recursion over the reference's horizon."""
    N = ref.horizon if horizon is None else horizon
    if N < 1:
        raise ValueError(f"horizon must be >= 1, got {N}")
    if ref.horizon != N:
        raise ValueError(f"reference has horizon {ref.horizon}, expected {N}")
    A, B, C = model.A, model.B, model.C
    nx, nu = model.state_dim, model.n
    CtQC = C.T @ weights.Q @ C
    CtQ = C.T @ weights.Q

    S = np.empty((N + 1, nx, nx))
    V = np.empty((N + 1, nx))
    K = np.empty((N, nu, nx))
    Ky = np.empty((N, nu, nx))

    S[N] = C.T @ weights.Q_N @ C
    V[N] = C.T @ (weights.Q_N @ ref.r[N])
    for k in range(N - 1, -1, -1):
        Sn = S[k + 1]
        BtS = B.T @ Sn
        M = weights.R + BtS @ B
        K[k] = np.linalg.solve(M, BtS @ A)
        Ky[k] = np.linalg.solve(M, B.T)
        Acl = A - B @ K[k]
        Sk = CtQC + A.T @ Sn @ Acl
        S[k] = 0.5 * (Sk + Sk.T)  # symmetrize against floating-point drift
        V[k] = Acl.T @ V[k + 1] + CtQ @ ref.r[k]
    return LqSolution(K=K, Ky=Ky, S=S, V=V)


@dataclass
class Trajectory:
    """Closed-loop rollout record."""

    x: np.ndarray        # (N+1, 2n)
    u: np.ndarray        # (N, n)  applied (possibly clipped) inputs
    u_raw: np.ndarray    # (N, n)  inputs before clipping
    y: np.ndarray        # (N+1, 2n-1)
    clipped: np.ndarray  # (N, n) bool

    @property
    def any_clipping(self) -> bool:
        return bool(self.clipped.any())


def rollout(
    model: LtiModel,
    solution: LqSolution,
    x0: np.ndarray,
    limits: ControlLimits | None = None,
) -> Trajectory:
    """Simulate the closed loop from ``x0`` over the solution's horizon.

    When limits are given, each input is clipped before it is applied and
    the clipping is flagged; speeds are additionally clamped to
    ``[0, v_max]`` so the recorded states stay physical (vehicles neither
    reverse nor run away while a large tracking error saturates the
    actuator).  Positions integrate the trapezoid of successive speeds,
    which coincides exactly with ``A @ x + B @ u`` whenever no clamp
    binds.
    """
    N = solution.horizon
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.state_dim,):
        raise ValueError(f"x0 must have shape ({model.state_dim},), got {x0.shape}")
    n = model.n
    dt = model.dt
    x = np.empty((N + 1, model.state_dim))
    u = np.empty((N, n))
    u_raw = np.empty((N, n))
    clipped = np.zeros((N, n), dtype=bool)
    x[0] = x0
    for k in range(N):
        uk = solution.control(k, x[k])
        u_raw[k] = uk
        if limits is not None:
            uk_applied = np.clip(uk, limits.acc_min, limits.acc_max)
            clipped[k] = uk_applied != uk
        else:
            uk_applied = uk
        u[k] = uk_applied
        v = x[k, n:]
        v_next = v + dt * uk_applied
        if limits is not None:
            v_next = np.clip(v_next, 0.0, limits.v_max)
        x[k + 1, :n] = x[k, :n] + 0.5 * dt * (v + v_next)
        x[k + 1, n:] = v_next
    y = x @ model.C.T
    return Trajectory(x=x, u=u, u_raw=u_raw, y=y, clipped=clipped)


@dataclass(frozen=True)
class PairGapSpec:
    """Safety spec for one consecutive pair in the string.

    ``min_net_gap`` applies whenever the constraint is active.  Same-lane
    pairs are always active; a cross-lane pair activates once its
    follower has closed to within ``activation_margin`` of
    ``merge_entry`` (follower position >= merge_entry - margin).
    """

    min_net_gap: float
    cross_lane: bool


@dataclass(frozen=True)
class Violation:
    kind: str   # "gap" | "input"
    step: int
    index: int  # pair index for gaps, vehicle index for inputs
    value: float
    bound: float


@dataclass
class ViolationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v.kind == kind)


def check_constraints(
    model: LtiModel,
    traj: Trajectory,
    limits: ControlLimits,
    pair_specs: list[PairGapSpec],
    vehicle_length: float,
    merge_entry: float = 0.0,
    activation_margin: float = 50.0,
    settle_time: float = 1.0,
) -> ViolationReport:
    """Check a rolled-out trajectory against spacing and input limits.

    Gap constraints compare net gaps (position difference minus vehicle
    length) against each pair's floor with settle semantics: the pair
    must hold its floor over the final ``settle_time`` of its active
    window.  Spacing while the string is still forming is not punishable
    (a pre-existing tight gap at step zero cannot be fixed by any plan,
    and a longer horizon can always buy more forming time), but a pair
    that has not settled safely by the end of the plan gets one
    violation, recorded at its last offending step.

    Input constraints are checked on the applied commands, so a rollout
    that was clipped to the actuation range passes them by construction
    and stands or falls on what its physical trajectory does to the gaps.

    Gap compliance allows a millimeter of slack: when the reference gap
    coincides with the floor the closed loop settles exactly on the
    bound, and the last-bit side of that approach carries no information.
    """
    n = model.n
    if len(pair_specs) != n - 1:
        raise ValueError(f"expected {n - 1} pair specs, got {len(pair_specs)}")
    violations: list[Violation] = []

    input_tol = 1e-9
    over = traj.u > limits.acc_max + input_tol
    under = traj.u < limits.acc_min - input_tol
    for k, i in zip(*np.nonzero(over | under)):
        violations.append(Violation("input", int(k), int(i),
                                    float(traj.u[k, i]),
                                    limits.acc_max if over[k, i] else limits.acc_min))

    gap_tol = 1e-3
    hold = max(1, int(round(settle_time / model.dt)))
    positions = traj.x[:, :n]
    for i, spec in enumerate(pair_specs):
        gaps = positions[:, i] - positions[:, i + 1] - vehicle_length
        if spec.cross_lane:
            active = positions[:, i + 1] >= merge_entry - activation_margin
        else:
            active = np.ones(len(gaps), dtype=bool)
        act = np.nonzero(active)[0]
        if act.size == 0:
            continue
        tail = act[-hold:]
        bad = tail[gaps[tail] < spec.min_net_gap - gap_tol]
        if bad.size:
            k = int(bad[-1])
            violations.append(Violation("gap", k, i,
                                        float(gaps[k]), spec.min_net_gap))
    violations.sort(key=lambda v: (v.step, v.kind, v.index))
    return ViolationReport(violations=violations)


@dataclass
class RepairResult:
    solution: LqSolution
    trajectory: Trajectory
    report: ViolationReport
    horizon: int
    degraded: bool


def solve_with_repair(
    model: LtiModel,
    weights: TrackerWeights,
    r_vec: np.ndarray,
    x0: np.ndarray,
    limits: ControlLimits,
    pair_specs: list[PairGapSpec],
    vehicle_length: float,
    horizon: int = 300,
    merge_entry: float = 0.0,
    activation_margin: float = 50.0,
    growth: float = 1.5,
    max_horizon: int = 1200,
) -> RepairResult:
    """Solve, roll out clipped, and re-solve over longer horizons until clean.

    The applied inputs respect the actuation range by construction, so
    what can go wrong is the physical trajectory: under clipping a short
    horizon may not leave enough time to form the required gaps.  The
    horizon grows geometrically until the clipped rollout is clean; if
    the cap is reached with violations remaining, the longest-horizon
    solution is returned flagged as degraded (still executable, since
    its inputs are clipped).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    N = min(horizon, max_horizon)
    while True:
        ref = constant_reference(r_vec, N)
        solution = solve_finite_horizon(model, weights, ref)
        traj = rollout(model, solution, x0, limits)
        report = check_constraints(
            model, traj, limits, pair_specs, vehicle_length,
            merge_entry=merge_entry, activation_margin=activation_margin,
        )
        if report.ok:
            return RepairResult(solution, traj, report, N, degraded=False)
        if N >= max_horizon:
            return RepairResult(solution, traj, report, N, degraded=not report.ok)
        N = min(int(np.ceil(N * growth)), max_horizon)


def converged_gains(
    model: LtiModel,
    weights: TrackerWeights,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> tuple[np.ndarray, np.ndarray]:
    """Receding-horizon gains: fixed point of the backward recursion.

    Iterates from the terminal condition until the feedback gain changes
    by at most ``tol`` in the max norm.  Raises ``RuntimeError`` if the
    iteration has not settled within ``max_iter`` steps.
    """
    A, B, C = model.A, model.B, model.C
    CtQC = C.T @ weights.Q @ C
    S = C.T @ weights.Q_N @ C
    K_prev: np.ndarray | None = None
    for _ in range(max_iter):
        BtS = B.T @ S
        M = weights.R + BtS @ B
        K = np.linalg.solve(M, BtS @ A)
        if K_prev is not None and np.max(np.abs(K - K_prev)) <= tol:
            Ky = np.linalg.solve(M, B.T)
            return K, Ky
        Sk = CtQC + A.T @ S @ (A - B @ K)
        S = 0.5 * (Sk + Sk.T)
        K_prev = K
    raise RuntimeError(f"gain iteration did not converge within {max_iter} steps")


def steady_state_feedforward(
    model: LtiModel,
    weights: TrackerWeights,
    K: np.ndarray,
    r_vec: np.ndarray,
) -> np.ndarray:
    """Converged costate for a constant reference under converged gains.

    Unique fixed point of ``V = (A - B K)' V + C' Q r``, obtained by a
    direct linear solve; the backward recursion converges to the same
    vector but geometrically slowly when the closed loop is lightly
    damped, so iterating is not an option here.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    M = (model.A - model.B @ K).T
    forcing = model.C.T @ (weights.Q @ r_vec)
    lhs = np.eye(M.shape[0]) - M
    U, sig, Vt = np.linalg.svd(lhs)
    cut = 1e-12 * (sig[0] if sig.size else 1.0)
    null = sig <= cut
    if not np.any(null):
        return np.linalg.solve(lhs, forcing)
    # an unanchored string keeps neutral closed-loop modes (uniform
    # translations).  Their costate component never moves during the
    # backward recursion, so the recursion's limit carries it straight
    # from the terminal condition; reproduce that split here.
    W = Vt[null].T   # right null vectors of lhs: M w = w
    Y = U[:, null]   # left null vectors: M' y = y
    if np.max(np.abs(Y.T @ forcing)) > 1e-9 * (1.0 + np.max(np.abs(forcing))):
        raise RuntimeError("reference excites a neutral closed-loop mode")
    inv_sig = np.where(null, 0.0, 1.0 / np.where(null, 1.0, sig))
    V_part = (Vt.T * inv_sig) @ (U.T @ forcing)
    V_term = model.C.T @ (weights.Q_N @ r_vec)
    coeff = np.linalg.solve(Y.T @ W, Y.T @ (V_term - V_part))
    return V_part + W @ coeff
