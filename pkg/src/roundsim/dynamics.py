"""Vehicle state, discrete action grid, kinematics, and driver models.

States are polar: radius r, azimuth theta (counterclockwise from +x), speed
v, heading offset phi from the local tangent, and integer lane index. The
state vector order [r, theta, v, phi, lane] is load-bearing: covariances and
samples elsewhere use the same ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidStateError
from .geometry import RoundaboutGeometry, wrap_angle, wrap_pi


@dataclass(frozen=True, slots=True)
class VehicleState:
    r: float
    theta: float
    v: float
    phi: float
    lane: int

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.v, self.phi, float(self.lane)])

    @staticmethod
    def from_array(arr) -> "VehicleState":
        return VehicleState(float(arr[0]), float(arr[1]), float(arr[2]),
                            float(arr[3]), int(round(float(arr[4]))))

    def validate(self, geo: RoundaboutGeometry) -> None:
        if not (0.0 < self.r <= geo.leg_end_radius + 1e-9):
            raise InvalidStateError(f"radius {self.r} outside world")
        if not (-1e-9 <= self.v <= geo.v_max + 1e-9):
            raise InvalidStateError(f"speed {self.v} outside [0, {geo.v_max}]")
        if not 0 <= self.lane < geo.n_lanes:
            raise InvalidStateError(f"lane {self.lane} outside [0, {geo.n_lanes})")


@dataclass(frozen=True)
class VehicleParams:
    """Footprint dimensions and control limits shared by the action grid."""

    length: float = 4.0
    width: float = 2.0
    a_max: float = 3.0       # m/s^2, hard accel/brake bound
    a_med: float = 1.5
    phidot_max: float = 0.4  # rad/s
    phidot_med: float = 0.2

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise InvalidParameterError("vehicle dimensions must be positive")
        if not (0 < self.a_med < self.a_max):
            raise InvalidParameterError("need 0 < a_med < a_max")
        if not (0 < self.phidot_med < self.phidot_max):
            raise InvalidParameterError("need 0 < phidot_med < phidot_max")

    @property
    def accel_levels(self) -> tuple[float, ...]:
        return (-self.a_max, -self.a_med, 0.0, self.a_med, self.a_max)

    @property
    def phidot_levels(self) -> tuple[float, ...]:
        return (-self.phidot_max, -self.phidot_med, 0.0,
                self.phidot_med, self.phidot_max)


DELTA_LEVELS = (-1, 0, 1)
N_ACCEL = 5
N_PHIDOT = 5
N_DELTA = 3
N_ACTIONS = N_ACCEL * N_PHIDOT * N_DELTA   # 75 joint controls per vehicle

# flat index = ai*15 + pi*3 + di with levels ordered low to high
IDX_CRUISE = 2 * N_PHIDOT * N_DELTA + 2 * N_DELTA + 1      # (0, 0, 0)
IDX_MAX_BRAKE = 0 * N_PHIDOT * N_DELTA + 2 * N_DELTA + 1   # (-a_max, 0, 0)
IDX_MED_BRAKE = 1 * N_PHIDOT * N_DELTA + 2 * N_DELTA + 1   # (-a_med, 0, 0)


def decode_action(idx: int, params: VehicleParams) -> tuple[float, float, int]:
    """Flat action index -> (accel, phi_dot, lane_delta)."""
    if not 0 <= idx < N_ACTIONS:
        raise InvalidParameterError(f"action index {idx} outside [0, {N_ACTIONS})")
    ai, rem = divmod(idx, N_PHIDOT * N_DELTA)
    pi, di = divmod(rem, N_DELTA)
    return params.accel_levels[ai], params.phidot_levels[pi], DELTA_LEVELS[di]


def encode_action(ai: int, pi: int, di: int) -> int:
    return ai * N_PHIDOT * N_DELTA + pi * N_DELTA + di


def step_circulating(state: VehicleState, accel: float, phi_dot: float,
                     lane_delta: int, dt: float, geo: RoundaboutGeometry,
                     kinematics_mode: str = "standard") -> VehicleState:
    """One kinematic step inside the annulus.

    theta advances by v*cos(phi)/r; the radial rate is v*sin(phi) in
    "standard" mode or v*sin(phi)/r in "paper" mode. Radius saturates to the
    annulus, speed to [0, v_max], phi wraps to [-pi, pi). The lane index
    moves instantly by lane_delta (clamped); physical migration toward the
    new lane center is the heading controller's job.
    """
    r, theta, v, phi, lane = state.r, state.theta, state.v, state.phi, state.lane
    theta = wrap_angle(theta + v * math.cos(phi) / r * dt)
    if kinematics_mode == "standard":
        r = r + v * math.sin(phi) * dt
    elif kinematics_mode == "paper":
        r = r + v * math.sin(phi) / r * dt
    else:
        raise InvalidParameterError(f"unknown kinematics_mode {kinematics_mode!r}")
    r = min(max(r, geo.r_inner), geo.r_outer)
    v = min(max(v + accel * dt, 0.0), geo.v_max)
    phi = wrap_pi(phi + phi_dot * dt)
    lane = min(max(lane + lane_delta, 0), geo.n_lanes - 1)
    return VehicleState(r, theta, v, phi, lane)


def step_av(state: VehicleState, accel: float, phi_dot: float, delta: int,
            dt: float, geo: RoundaboutGeometry, z_ok: bool = True,
            kinematics_mode: str = "standard") -> VehicleState:
    """Planner-controlled step: kinematics plus the gated lane change.

    z_ok is the caller-evaluated lane-change safety condition (adaptive-gap
    check against target-lane traffic); it only matters when delta != 0.
    """
    if dt <= 0.0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    new_lane = lane_change(state.lane, delta, z_ok, geo.n_lanes)
    stepped = step_circulating(state, accel, phi_dot, 0, dt, geo,
                               kinematics_mode)
    if new_lane == stepped.lane:
        return stepped
    return VehicleState(stepped.r, stepped.theta, stepped.v, stepped.phi,
                        new_lane)


def lane_change(lane: int, delta: int, z_ok: bool, n_lanes: int) -> int:
    """Lane index after a change decision.

    delta=0 or an out-of-range target keeps the lane; otherwise the change
    happens iff the caller-evaluated safety condition z_ok holds (every
    target-lane vehicle at least the adaptive safe distance away).
    """
    if delta == 0:
        return lane
    target = lane + delta
    if not 0 <= target < n_lanes:
        return lane
    return target if z_ok else lane


@dataclass(frozen=True)
class IdmParams:
    """Car-following (IDM) parameters and lane-keeping gains for HDVs."""

    v0: float = 5.0        # desired speed, m/s
    t_headway: float = 1.5
    s0: float = 2.0        # jam gap, m
    a_idm: float = 2.0     # comfortable accel bound
    b_idm: float = 2.0     # comfortable decel bound
    exponent: float = 4.0
    k_r: float = 0.3       # radial lane-keeping gain
    k_phi: float = 1.0     # heading damping gain

    def __post_init__(self):
        if min(self.v0, self.t_headway, self.s0, self.a_idm, self.b_idm,
               self.exponent) <= 0:
            raise InvalidParameterError("IDM parameters must be positive")


def idm_accel(v: float, gap: float, v_lead: float, p: IdmParams) -> float:
    """Intelligent-driver-model acceleration for a follower.

    gap is bumper-to-bumper distance to the leader (arc length works for
    circulating traffic); free flow is requested with gap = inf. A collapsed
    or negative gap commands the emergency bound -2*b_idm. Output clamped to
    [-2*b_idm, a_idm].
    """
    if gap <= 0.0:
        return -2.0 * p.b_idm
    dv = v - v_lead
    s_star = p.s0 + v * p.t_headway + v * dv / (
        2.0 * math.sqrt(p.a_idm * p.b_idm))
    s_star = max(s_star, 0.0)
    a = p.a_idm * (1.0 - (v / p.v0) ** p.exponent - (s_star / gap) ** 2)
    return min(max(a, -2.0 * p.b_idm), p.a_idm)


def lane_keep_phidot(r: float, phi: float, lane_center: float,
                     p: IdmParams, phidot_max: float = 0.4) -> float:
    """Heading-rate command pulling a vehicle toward a lane center."""
    cmd = -p.k_r * (r - lane_center) - p.k_phi * phi
    return min(max(cmd, -phidot_max), phidot_max)


def arc_gap(theta_follow: float, theta_lead: float, radius: float,
            length_follow: float, length_lead: float) -> float:
    """Bumper-to-bumper arc gap from follower to the leader ahead (CCW)."""
    arc = wrap_angle(theta_lead - theta_follow) * radius
    return arc - 0.5 * (length_follow + length_lead)


def find_leader(state: VehicleState, neighbors: list[VehicleState]) -> int:
    """Index of the nearest same-lane neighbor ahead, or -1."""
    best, best_arc = -1, math.inf
    for k, nb in enumerate(neighbors):
        if nb.lane != state.lane:
            continue
        arc = wrap_angle(nb.theta - state.theta)
        if 1e-9 < arc < best_arc:
            best_arc, best = arc, k
    return best


def step_hdv_nominal(state: VehicleState, neighbors: list[VehicleState],
                     dt: float, geo: RoundaboutGeometry, p: IdmParams,
                     length: float = 4.0,
                     neighbor_lengths: list[float] | None = None,
                     phidot_max: float = 0.4,
                     kinematics_mode: str = "standard") -> VehicleState:
    """Nominal HDV step: IDM toward the nearest same-lane leader, heading
    controller toward the lane center, never a lane change."""
    k = find_leader(state, neighbors)
    if k < 0:
        a = idm_accel(state.v, math.inf, 0.0, p)
    else:
        lead = neighbors[k]
        lead_len = neighbor_lengths[k] if neighbor_lengths else length
        gap = arc_gap(state.theta, lead.theta,
                      geo.lane_center(state.lane), length, lead_len)
        a = idm_accel(state.v, gap, lead.v, p)
    pd = lane_keep_phidot(state.r, state.phi, geo.lane_center(state.lane),
                          p, phidot_max)
    return step_circulating(state, a, pd, 0, dt, geo, kinematics_mode)


def idm_equilibrium_gap(v: float, p: IdmParams) -> float:
    """Gap at which IDM holds speed v exactly behind an equal-speed leader."""
    if not 0.0 <= v < p.v0:
        raise InvalidParameterError(f"equilibrium needs 0 <= v < v0, got {v}")
    return (p.s0 + v * p.t_headway) / math.sqrt(1.0 - (v / p.v0) ** p.exponent)
