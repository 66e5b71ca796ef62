"""Shared world model: vehicle rosters, movement modes, and mode-aware
stepping used by both the simulator and the planner's internal model.

A vehicle is APPROACHING (radially inbound on its entry leg, heading offset
pinned to +pi/2 so the footprint points at the circle), CIRCULATING (full
polar kinematics inside the annulus), EXITING (radially outbound on the
destination leg, offset -pi/2), ARRIVED (footprint fully past the leg end,
removed from interaction), or COLLIDED (frozen). Entry and exit paths run on
the leg centerline; rosters are expected to stagger flows so a leg never
carries opposite directions at once.

State rows follow the order [r, theta, v, phi, lane].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IdmParams, idm_accel, lane_keep_phidot
from .errors import ConfigError
from .geometry import RoundaboutGeometry, angle_diff, wrap_angle, wrap_pi

MODE_APPROACH = 0
MODE_CIRCULATE = 1
MODE_EXIT = 2
MODE_ARRIVED = 3
MODE_COLLIDED = 4

KIND_AV = "AV"
KIND_HDV = "HDV"

MODE_NAMES = {MODE_APPROACH: "approach", MODE_CIRCULATE: "circulate",
              MODE_EXIT: "exit", MODE_ARRIVED: "arrived",
              MODE_COLLIDED: "collided"}


@dataclass(frozen=True)
class VehicleSpec:
    vid: str
    kind: str                 # AV | HDV
    entry: int                # entry leg index
    dest: int                 # destination exit index
    spawn_radius: float       # initial radial position on the entry leg
    lane: int                 # target circulating lane
    v_init: float
    length: float = 4.0
    width: float = 2.0

    def validate(self, geo: RoundaboutGeometry, path: str) -> None:
        if self.kind not in (KIND_AV, KIND_HDV):
            raise ConfigError(f"{path}.kind", f"must be AV or HDV, got {self.kind!r}")
        n_exits = len(geo.exit_angles)
        if not 0 <= self.entry < n_exits:
            raise ConfigError(f"{path}.entry", f"leg index {self.entry} out of range")
        if not 0 <= self.dest < n_exits:
            raise ConfigError(f"{path}.dest", f"exit index {self.dest} out of range")
        if not geo.r_outer < self.spawn_radius <= geo.leg_end_radius:
            raise ConfigError(
                f"{path}.spawn_radius",
                f"{self.spawn_radius} not inside the entry leg "
                f"({geo.r_outer}, {geo.leg_end_radius}]")
        if not 0 <= self.lane < geo.n_lanes:
            raise ConfigError(f"{path}.lane", f"lane {self.lane} out of range")
        if not 0.0 <= self.v_init <= geo.v_max:
            raise ConfigError(f"{path}.v_init",
                              f"{self.v_init} outside [0, {geo.v_max}]")
        if self.length <= 0 or self.width <= 0:
            raise ConfigError(f"{path}.length", "dimensions must be positive")


def initial_row(spec: VehicleSpec, geo: RoundaboutGeometry) -> np.ndarray:
    theta = geo.exit_angles[spec.entry]
    return np.array([spec.spawn_radius, theta, spec.v_init,
                     0.5 * math.pi, float(spec.lane)])


def step_row(row: np.ndarray, mode: int, spec: VehicleSpec,
             accel: float, phi_dot: float, lane_delta: int, z_ok: bool,
             dt: float, geo: RoundaboutGeometry,
             kinematics_mode: str = "standard") -> tuple[np.ndarray, int]:
    """Advance one vehicle by one step under its movement mode.

    Steering and lane changes only act while circulating; approach and exit
    movement is purely radial with the azimuth pinned to the leg angle. The
    heading sweeps between radial and tangential across the ring band
    (radial outside r_outer, tangential at the lane center), so a merging
    or exiting body stays parallel to the central island instead of
    pointing an end at it. Returns the new state row and mode.
    """
    r, theta, v, phi, lane = row
    if mode == MODE_APPROACH:
        merge_r = geo.lane_center(spec.lane)
        new_r = r - v * dt
        new_v = min(max(v + accel * dt, 0.0), geo.v_max)
        if new_r <= merge_r:
            return (np.array([merge_r, geo.exit_angles[spec.entry], new_v,
                              0.0, float(spec.lane)]), MODE_CIRCULATE)
        frac = min((new_r - merge_r) / (geo.r_outer - merge_r), 1.0)
        return (np.array([new_r, geo.exit_angles[spec.entry], new_v,
                          0.5 * math.pi * frac, lane]), mode)
    if mode == MODE_CIRCULATE:
        dest_angle = geo.exit_angles[spec.dest]
        before = angle_diff(theta, dest_angle)
        new_theta = wrap_angle(theta + v * math.cos(phi) / r * dt)
        after = angle_diff(new_theta, dest_angle)
        if -0.5 < before < 0.5 and 0.0 <= after < 0.5:
            # at or just past the destination: peel off onto the exit leg.
            # before may itself be past the mark when a disturbance carried
            # theta across it between steps; entries merge at least a
            # quarter turn from their exit, so only a genuine arrival can
            # sit this close to it
            new_v = min(max(v + accel * dt, 0.0), geo.v_max)
            lane_c = geo.lane_center(int(lane))
            frac = min(max((r - lane_c) / (geo.r_outer - lane_c), 0.0), 1.0)
            return (np.array([r, dest_angle, new_v, -0.5 * math.pi * frac,
                              lane]), MODE_EXIT)
        if kinematics_mode == "standard":
            new_r = r + v * math.sin(phi) * dt
        else:
            new_r = r + v * math.sin(phi) / r * dt
        new_r = min(max(new_r, geo.r_inner), geo.r_outer)
        new_v = min(max(v + accel * dt, 0.0), geo.v_max)
        new_phi = wrap_pi(phi + phi_dot * dt)
        new_lane = lane
        if lane_delta != 0 and z_ok:
            target = int(lane) + lane_delta
            if 0 <= target < geo.n_lanes:
                new_lane = float(target)
        return (np.array([new_r, new_theta, new_v, new_phi, new_lane]), mode)
    if mode == MODE_EXIT:
        new_r = r + v * dt
        new_v = min(max(v + accel * dt, 0.0), geo.v_max)
        lane_c = geo.lane_center(int(lane))
        frac = min(max((new_r - lane_c) / (geo.r_outer - lane_c), 0.0), 1.0)
        new_phi = -0.5 * math.pi * frac
        if new_r - 0.5 * spec.length > geo.leg_end_radius:
            return (np.array([new_r, theta, new_v, new_phi, lane]),
                    MODE_ARRIVED)
        return (np.array([new_r, theta, new_v, new_phi, lane]), mode)
    return row.copy(), mode   # arrived / collided: frozen


@dataclass(frozen=True)
class YieldRule:
    """Entry gap acceptance: brake near the merge point while circulating
    traffic upstream could reach the entry within the critical time gap.
    Judging the gap by arrival time rather than plain distance lets entries
    proceed past stopped or crawling vehicles instead of waiting on them
    forever."""

    window: float = 0.9       # upstream angular window, rad
    engage_gap: float = 6.0   # radial distance to merge point that arms it, m
    t_gap: float = 3.0        # critical time gap, s


# Circulating car-following treats any body within this much radial slack of
# the follower's own band (beyond the half-widths) as occupying its path.
# Keeps the cutoff under the lane-center spacing so parallel adjacent-lane
# traffic is never a leader, while catching mergers and lane changers midway.
RADIAL_OVERLAP_MARGIN = 0.6


def nominal_accel(idx: int, rows: np.ndarray, modes: np.ndarray,
                  specs: list[VehicleSpec], geo: RoundaboutGeometry,
                  idm: IdmParams,
                  yield_rule: YieldRule | None = None) -> float:
    """IDM acceleration for one vehicle against the current traffic.

    Approach mode follows the leader on the same entry path and yields to
    circulating traffic near the merge; circulation follows the nearest body
    ahead whose radial band overlaps its own, whatever that body's mode or
    lane label; exit follows the same-leg leader ahead.
    """
    row = rows[idx]
    spec = specs[idx]
    mode = modes[idx]
    if mode == MODE_APPROACH:
        gap, v_lead = math.inf, 0.0
        for j in range(len(specs)):
            if j == idx or modes[j] != MODE_APPROACH:
                continue
            if specs[j].entry != spec.entry:
                continue
            if rows[j][0] < row[0]:
                g = row[0] - rows[j][0] - 0.5 * (spec.length + specs[j].length)
                if g < gap:
                    gap, v_lead = g, rows[j][2]
        a = idm_accel(row[2], gap, v_lead, idm)
        if yield_rule is not None:
            merge_r = geo.lane_center(spec.lane)
            if row[0] - merge_r <= yield_rule.engage_gap:
                entry_angle = geo.exit_angles[spec.entry]
                for j in range(len(specs)):
                    if j == idx or modes[j] != MODE_CIRCULATE:
                        continue
                    upstream = wrap_angle(entry_angle - rows[j][1])
                    if upstream > yield_rule.window:
                        continue
                    arc = upstream * geo.lane_center(int(rows[j][4]))
                    if arc <= max(rows[j][2], 0.1) * yield_rule.t_gap:
                        a = min(a, -idm.b_idm)
                        break
        return a
    if mode == MODE_CIRCULATE:
        gap, v_lead = math.inf, 0.0
        for j in range(len(specs)):
            if j == idx or modes[j] == MODE_ARRIVED:
                continue
            band = 0.5 * (spec.width + specs[j].width) + RADIAL_OVERLAP_MARGIN
            if abs(rows[j][0] - row[0]) > band:
                continue
            arc = wrap_angle(rows[j][1] - row[1])
            if 1e-9 < arc:
                g = arc * row[0] - 0.5 * (spec.length + specs[j].length)
                if g < gap:
                    gap, v_lead = g, rows[j][2]
        return idm_accel(row[2], gap, v_lead, idm)
    if mode == MODE_EXIT:
        gap, v_lead = math.inf, 0.0
        for j in range(len(specs)):
            if j == idx or modes[j] != MODE_EXIT:
                continue
            if specs[j].dest != spec.dest:
                continue
            if rows[j][0] > row[0]:
                g = rows[j][0] - row[0] - 0.5 * (spec.length + specs[j].length)
                if g < gap:
                    gap, v_lead = g, rows[j][2]
        return idm_accel(row[2], gap, v_lead, idm)
    return 0.0


def step_hdv_in_world(idx: int, rows: np.ndarray, modes: np.ndarray,
                      specs: list[VehicleSpec], dt: float,
                      geo: RoundaboutGeometry, idm: IdmParams,
                      yield_rule: YieldRule | None,
                      kinematics_mode: str = "standard",
                      accel_override: float | None = None
                      ) -> tuple[np.ndarray, int]:
    """One nominal HDV step: IDM accel, lane-keeping steering, no lane change."""
    a = (accel_override if accel_override is not None
         else nominal_accel(idx, rows, modes, specs, geo, idm, yield_rule))
    row = rows[idx]
    pd = 0.0
    if modes[idx] == MODE_CIRCULATE:
        pd = lane_keep_phidot(row[0], row[3], geo.lane_center(int(row[4])), idm)
    return step_row(row, modes[idx], specs[idx], a, pd, 0, False, dt, geo,
                    kinematics_mode)


def build_hdv_cache(rows: np.ndarray, modes: np.ndarray,
                    specs: list[VehicleSpec], hdv_idx: list[int],
                    steps: int, dt: float, geo: RoundaboutGeometry,
                    idm: IdmParams, yield_rule: YieldRule | None,
                    kinematics_mode: str = "standard"
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Nominal HDV rollout used by the planner: HDVs react to each other by
    IDM while every other vehicle stays frozen at its current pose.

    Returns (n_hdv, steps+1, 5) state rows and (n_hdv, steps+1) modes; slice
    t=0 is the current state.
    """
    n_h = len(hdv_idx)
    out = np.empty((n_h, steps + 1, 5))
    out_modes = np.empty((n_h, steps + 1), dtype=np.int64)
    work_rows = rows.copy()
    work_modes = modes.copy()
    for k, j in enumerate(hdv_idx):
        out[k, 0] = work_rows[j]
        out_modes[k, 0] = work_modes[j]
    for t in range(1, steps + 1):
        stepped = [step_hdv_in_world(j, work_rows, work_modes, specs, dt, geo,
                                     idm, yield_rule, kinematics_mode)
                   for j in hdv_idx]
        for k, j in enumerate(hdv_idx):
            work_rows[j], work_modes[j] = stepped[k]
            out[k, t] = work_rows[j]
            out_modes[k, t] = work_modes[j]
    return out, out_modes
