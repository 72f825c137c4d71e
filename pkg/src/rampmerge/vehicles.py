"""Domain types and the shared one-dimensional merge coordinate system.

Every vehicle, whether it drives on the mainline or on the on-ramp, is
located on a single longitudinal axis whose origin sits at the merge
point.  Upstream positions are negative, downstream positions positive.
Projecting both lanes onto one axis makes distance-to-merge directly
comparable across lanes, which is what the string controller and the
sequencing logic need.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass


class Lane(enum.Enum):
    MAINLINE = "mainline"
    RAMP = "ramp"

    @property
    def code(self) -> int:
        return 0 if self is Lane.MAINLINE else 1

    @classmethod
    def from_code(cls, code: int) -> "Lane":
        return Lane.MAINLINE if code == 0 else Lane.RAMP


class ControlStatus(enum.Enum):
    UNCONTROLLED = "uncontrolled"
    RAMP_LEADER_REGULATED = "ramp_leader_regulated"
    OPTIMAL_CONTROLLED = "optimal_controlled"
    MERGED = "merged"

    @property
    def code(self) -> int:
        return _STATUS_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "ControlStatus":
        return _STATUS_BY_CODE[code]


_STATUS_CODES = {
    ControlStatus.UNCONTROLLED: 0,
    ControlStatus.RAMP_LEADER_REGULATED: 1,
    ControlStatus.OPTIMAL_CONTROLLED: 2,
    ControlStatus.MERGED: 3,
}
_STATUS_BY_CODE = {v: k for k, v in _STATUS_CODES.items()}

#: Nominal vehicle length in meters.  Used for net (bumper-to-bumper) gap
#: accounting and reporting; the point-mass dynamics do not depend on it.
VEHICLE_LENGTH = 5.0


@dataclass
class ControlLimits:
    """Actuation and spacing limits shared by the controller stack.

    ``acc_min``/``acc_max`` bound commanded accelerations (m/s^2).
    ``gap_min_headway`` converts a vehicle's recorded entry speed into its
    minimum admissible net gap; ``gap_floor`` is the standstill floor (m).
    ``v_max`` caps physical speed (m/s): tracking transients may command
    sustained acceleration, but vehicles never exceed this.
    """

    acc_min: float = -2.99
    acc_max: float = 2.50
    gap_min_headway: float = 2.0
    gap_floor: float = 5.0
    v_max: float = 36.33

    def validate(self) -> None:
        if not self.acc_min < 0.0 < self.acc_max:
            raise ValueError(
                f"acc_min/acc_max must straddle zero, got "
                f"[{self.acc_min}, {self.acc_max}]"
            )
        if self.v_max <= 0.0:
            raise ValueError("v_max must be positive")
        if self.gap_min_headway <= 0.0:
            raise ValueError("gap_min_headway must be positive")
        if self.gap_floor <= 0.0:
            raise ValueError("gap_floor must be positive")


@dataclass
class MergeGeometry:
    """Static layout of the merge area on the shared axis.

    The ramp control zone ends at the merge point (position 0); the ramp
    buffer zone lies immediately upstream of it.  ``trigger_point`` is the
    downstream boundary of the ramp buffer zone, i.e. the line whose
    crossing by a ramp leader starts a new decision cycle.  The extent
    fields describe how much roadway the simulation models around the
    merge point.
    """

    ramp_control_zone_len: float = 300.0
    ramp_buffer_zone_len: float = 150.0
    mainline_control_zone_len: float = 1000.0
    merge_zone_len: float = 200.0
    # downstream boundary of the ramp buffer zone; derived when omitted
    trigger_point: float | None = None
    upstream_extent: float = 2000.0
    downstream_extent: float = 500.0
    ramp_length: float = 900.0

    def __post_init__(self) -> None:
        if self.trigger_point is None:
            self.trigger_point = -self.ramp_control_zone_len

    def validate(self) -> None:
        for name in (
            "ramp_control_zone_len",
            "ramp_buffer_zone_len",
            "mainline_control_zone_len",
            "merge_zone_len",
            "upstream_extent",
            "downstream_extent",
            "ramp_length",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.trigger_point >= 0.0:
            raise ValueError("trigger_point must lie upstream of the merge point")
        # buffer zone must fit on the modeled ramp, upstream of the control zone
        if self.ramp_control_zone_len + self.ramp_buffer_zone_len > self.ramp_length:
            raise ValueError("ramp_length too short for control + buffer zones")
        if self.merge_zone_len > self.downstream_extent:
            raise ValueError("merge zone extends past the modeled downstream extent")

    @property
    def ramp_buffer_start(self) -> float:
        """Upstream boundary of the ramp buffer zone on the merge axis."""
        return self.trigger_point - self.ramp_buffer_zone_len

    @property
    def merge_zone_end(self) -> float:
        return self.merge_zone_len


@dataclass
class VehicleState:
    """Snapshot of a single vehicle on the merge axis.

    ``entry_speed`` is the speed recorded when the vehicle entered its
    buffer zone (it parameterizes the vehicle's minimum-gap requirement);
    it stays ``None`` until recorded.
    """

    id: int
    lane: Lane
    position: float
    speed: float
    accel: float = 0.0
    status: ControlStatus = ControlStatus.UNCONTROLLED
    entry_speed: float | None = None

    def validate(self, limits: ControlLimits | None = None) -> None:
        if self.speed < 0.0:
            raise ValueError(f"vehicle {self.id}: speed {self.speed} < 0")
        if limits is not None and self.status is not ControlStatus.UNCONTROLLED:
            if not limits.acc_min - 1e-9 <= self.accel <= limits.acc_max + 1e-9:
                raise ValueError(
                    f"vehicle {self.id}: accel {self.accel} outside "
                    f"[{limits.acc_min}, {limits.acc_max}] while {self.status.value}"
                )


def map_to_axis(raw_lane_position: float, lane: Lane, geometry: MergeGeometry) -> float:
    """Project a lane-local station onto the shared merge axis.

    Lane stations are measured in meters along the lane in the direction
    of travel, starting at zero where the modeled lane begins.  The
    mapping is an exact affine shift, so distance-to-merge is preserved.

    Raises ``ValueError`` for stations outside the modeled lane.
    """
    if lane is Lane.MAINLINE:
        length = geometry.upstream_extent + geometry.downstream_extent
        if not 0.0 <= raw_lane_position <= length:
            raise ValueError(
                f"mainline station {raw_lane_position} outside [0, {length}]"
            )
        return raw_lane_position - geometry.upstream_extent
    if not 0.0 <= raw_lane_position <= geometry.ramp_length:
        raise ValueError(
            f"ramp station {raw_lane_position} outside [0, {geometry.ramp_length}]"
        )
    return raw_lane_position - geometry.ramp_length


def gap_min_for(vehicle: VehicleState, limits: ControlLimits) -> float:
    """Minimum admissible net gap ahead of ``vehicle``.

    Scales with the speed recorded at buffer entry and never drops below
    the standstill floor.
    """
    v0 = vehicle.entry_speed
    if v0 is None:
        raise ValueError(f"vehicle {vehicle.id} has no recorded entry speed")
    return max(limits.gap_min_headway * v0, limits.gap_floor)


def net_gap(leader_position: float, follower_position: float,
            vehicle_length: float = VEHICLE_LENGTH) -> float:
    """Bumper-to-bumper gap between two vehicles on the shared axis."""
    return leader_position - follower_position - vehicle_length
