"""Hierarchical safety assessment.

Three interaction classes are scored: AV-AV (instantaneous + temporal risk),
AV-HDV (instantaneous + temporal + Monte Carlo collision probability), and
AV-boundary (clearance penalty). A tree node is safe only when every class
clears its threshold. Functions here are the reference implementations; the
planner mirrors them on arrays and a test pins both routes together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import VehicleState
from .errors import InvalidParameterError
from .geometry import (RoundaboutGeometry, ZONE_APPROACH, ZONE_CIRCULATION,
                       boundary_distance, footprint, min_distance, wrap_pi)


class _Infeasible:
    """Sentinel for the boundary penalty's hard-violation outcome."""

    __slots__ = ()

    def __repr__(self):
        return "INFEASIBLE"


INFEASIBLE = _Infeasible()

# two leg-bound vehicles count as sharing an approach zone only when their
# rays belong to the same leg; exit rays sit at most half the flip window
# past the leg axis, while distinct legs differ by at least a quarter turn
SAME_LEG_TOL = 0.6


@dataclass(frozen=True)
class RiskConfig:
    d_base: float = 5.0          # minimum safe separation, m
    kappa_v: float = 0.5         # speed-scaled separation, s
    beta_1: float = 0.5          # relative-speed influence
    beta_2: float = 0.5          # relative-heading influence
    beta_3: float = 0.5          # lane-difference influence
    v_ref: float = 5.0
    lambda_v: float = 0.5        # closing-speed amplification in r_inst
    beta_boundary: float = 1.0   # boundary penalty scale
    d_safe_boundary: float = 1.5
    d_min: float = 0.25          # hard clearance floor
    w1_cc: float = 0.5
    w2_cc: float = 0.5
    w1_ch: float = 0.4
    w2_ch: float = 0.3
    w3_ch: float = 0.3
    q_th_cc: float = 0.35
    q_th_ch: float = 0.35
    t_risk: int = 10             # prediction horizon, steps
    distance_mode: str = "exact"
    adaptive: bool = True        # False pins d_safe = d_base (ablation)

    def __post_init__(self):
        weights = (self.w1_cc, self.w2_cc, self.w1_ch, self.w2_ch, self.w3_ch)
        if min(weights) < 0:
            raise InvalidParameterError("risk weights must be >= 0")
        if abs(self.w1_cc + self.w2_cc - 1.0) > 1e-9:
            raise InvalidParameterError("w1_cc + w2_cc must equal 1")
        if abs(self.w1_ch + self.w2_ch + self.w3_ch - 1.0) > 1e-9:
            raise InvalidParameterError("w1_ch + w2_ch + w3_ch must equal 1")
        if self.q_th_cc <= 0 or self.q_th_ch <= 0:
            raise InvalidParameterError("safety thresholds must be > 0")
        if self.d_min <= 0 or self.d_base <= 0:
            raise InvalidParameterError("d_min and d_base must be > 0")
        if self.t_risk < 1:
            raise InvalidParameterError("t_risk must be >= 1")
        if self.distance_mode not in ("exact", "vertex"):
            raise InvalidParameterError(
                f"unknown distance_mode {self.distance_mode!r}")


def adaptive_safe_distance(s_i: VehicleState, s_j: VehicleState,
                           cfg: RiskConfig, geo: RoundaboutGeometry) -> float:
    """Pairwise safety threshold scaled by relative speed, heading, lane
    difference, and shared conflict-space occupancy (same approach leg, or
    circulating in the same lane)."""
    if not cfg.adaptive:
        return cfg.d_base
    dv = abs(s_i.v - s_j.v)
    base = max(cfg.d_base, cfg.kappa_v * dv)
    a1 = 1.0 + cfg.beta_1 * dv / cfg.v_ref
    a2 = 1.0 + cfg.beta_2 * abs(wrap_pi(s_i.phi - s_j.phi)) / math.pi
    a3 = 1.0 + cfg.beta_3 * abs(s_i.lane - s_j.lane)
    zi = geo.classify_zone(s_i.r)
    zj = geo.classify_zone(s_j.r)
    a4 = 1.0
    if (zi == ZONE_APPROACH and zj == ZONE_APPROACH
            and abs(wrap_pi(s_i.theta - s_j.theta)) < SAME_LEG_TOL):
        a4 += 1.0
    if (zi == ZONE_CIRCULATION and zj == ZONE_CIRCULATION
            and s_i.lane == s_j.lane):
        a4 += 1.0
    return base * a1 * a2 * a3 * a4


def boundary_penalty(d: float, cfg: RiskConfig):
    """Clearance penalty toward the road boundary.

    Returns the INFEASIBLE sentinel at or below the hard floor d_min, a
    negative quadratic inside the caution band, and 0 beyond it.
    """
    if d <= cfg.d_min:
        return INFEASIBLE
    if d <= cfg.d_safe_boundary:
        ratio = cfg.d_min / d
        return -cfg.beta_boundary * ratio * ratio
    return 0.0


def rho(d: float, d_safe: float) -> float:
    """Normalized proximity kernel: 0 beyond d_safe, (1 - d/d_safe)^2 inside."""
    if d_safe <= 0.0:
        raise InvalidParameterError(f"d_safe must be > 0, got {d_safe}")
    if d >= d_safe:
        return 0.0
    x = 1.0 - d / d_safe
    return x * x


def instantaneous_risk(s_i: VehicleState, s_j: VehicleState,
                       dims_i: tuple[float, float], dims_j: tuple[float, float],
                       cfg: RiskConfig, geo: RoundaboutGeometry,
                       dist: float | None = None,
                       d_safe: float | None = None) -> float:
    """exp(-d / d_safe) amplified by the closing-speed ratio."""
    if dist is None:
        fi = footprint(s_i.r, s_i.theta, s_i.phi, *dims_i)
        fj = footprint(s_j.r, s_j.theta, s_j.phi, *dims_j)
        dist = min_distance(fi, fj, cfg.distance_mode)
    if d_safe is None:
        d_safe = adaptive_safe_distance(s_i, s_j, cfg, geo)
    dv = abs(s_i.v - s_j.v)
    return math.exp(-dist / d_safe) * (1.0 + cfg.lambda_v * dv / geo.v_max)


def temporal_risk(traj_i, traj_j, dims_i, dims_j,
                  cfg: RiskConfig, geo: RoundaboutGeometry) -> float:
    """Discount-weighted mean of the proximity kernel along two planned
    trajectories (step index t = 1..T weighted 1/(1+t))."""
    if len(traj_i) != len(traj_j):
        raise InvalidParameterError(
            f"trajectory lengths differ: {len(traj_i)} vs {len(traj_j)}")
    t_len = len(traj_i)
    if t_len < 1:
        raise InvalidParameterError("temporal risk needs at least one step")
    total = 0.0
    for t in range(1, t_len + 1):
        si, sj = traj_i[t - 1], traj_j[t - 1]
        fi = footprint(si.r, si.theta, si.phi, *dims_i)
        fj = footprint(sj.r, sj.theta, sj.phi, *dims_j)
        d = min_distance(fi, fj, cfg.distance_mode)
        ds = adaptive_safe_distance(si, sj, cfg, geo)
        total += rho(d, ds) / (1.0 + t)
    return total / t_len


def risk_cc(s_i: VehicleState, s_j: VehicleState, traj_i, traj_j,
            dims_i, dims_j, cfg: RiskConfig, geo: RoundaboutGeometry) -> float:
    """AV-AV safety level: weighted instantaneous + temporal risk."""
    r_inst = instantaneous_risk(s_i, s_j, dims_i, dims_j, cfg, geo)
    r_t = temporal_risk(traj_i, traj_j, dims_i, dims_j, cfg, geo)
    return cfg.w1_cc * r_inst + cfg.w2_cc * r_t

def risk_ch(s_i: VehicleState, s_h_mean_next: VehicleState, traj_i, hdv_traj,
            c_ih: float, dims_i, dims_h,
            cfg: RiskConfig, geo: RoundaboutGeometry) -> float:
    """AV-HDV safety level: instantaneous risk against the one-step predicted
    mean, temporal risk against the nominal rollout, and the Monte Carlo
    collision probability (computed by the caller)."""
    r_inst = instantaneous_risk(s_i, s_h_mean_next, dims_i, dims_h, cfg, geo)
    r_t = temporal_risk(traj_i, hdv_traj, dims_i, dims_h, cfg, geo)
    return cfg.w1_ch * r_inst + cfg.w2_ch * r_t + cfg.w3_ch * c_ih


def lane_change_margin(s_i: VehicleState, dims_i, target_lane: int,
                       others: list[tuple[VehicleState, tuple[float, float]]],
                       cfg: RiskConfig, geo: RoundaboutGeometry) -> float:
    """Safety margin M for a lane change: max(0, 1 - gap/d_safe) against the
    closest target-lane vehicle. 0 means the change is admissible."""
    worst = 0.0
    fi = footprint(s_i.r, s_i.theta, s_i.phi, *dims_i)
    for s_j, dims_j in others:
        if s_j.lane != target_lane:
            continue
        fj = footprint(s_j.r, s_j.theta, s_j.phi, *dims_j)
        gap = min_distance(fi, fj, cfg.distance_mode)
        ds = adaptive_safe_distance(s_i, s_j, cfg, geo)
        m = max(0.0, 1.0 - gap / ds)
        worst = max(worst, m)
    return worst


def lane_change_admissible(s_i, dims_i, target_lane, others,
                           cfg: RiskConfig, geo: RoundaboutGeometry) -> bool:
    return lane_change_margin(s_i, dims_i, target_lane, others, cfg, geo) == 0.0


def classify_node(av_states: list[VehicleState], av_dims,
                  hdv_states: list[VehicleState], hdv_dims,
                  av_trajs, hdv_trajs, hdv_means_next,
                  c_ih: dict[tuple[int, int], float],
                  cfg: RiskConfig, geo: RoundaboutGeometry) -> bool:
    """Reference node safety classification.

    Safe iff every AV-AV risk <= q_th_cc, every AV-HDV risk <= q_th_ch, and
    every AV boundary clearance >= d_min. av_trajs/hdv_trajs are per-vehicle
    forward state sequences of equal length; c_ih maps (av index, hdv index)
    to the collision probability.
    """
    n_av = len(av_states)
    for i in range(n_av):
        fi = footprint(av_states[i].r, av_states[i].theta, av_states[i].phi,
                       *av_dims[i])
        if boundary_distance(fi, geo) < cfg.d_min:
            return False
    for i in range(n_av):
        for j in range(i + 1, n_av):
            q = risk_cc(av_states[i], av_states[j], av_trajs[i], av_trajs[j],
                        av_dims[i], av_dims[j], cfg, geo)
            if q > cfg.q_th_cc:
                return False
    for i in range(n_av):
        for h in range(len(hdv_states)):
            q = risk_ch(av_states[i], hdv_means_next[h], av_trajs[i],
                        hdv_trajs[h], c_ih[(i, h)], av_dims[i], hdv_dims[h],
                        cfg, geo)
            if q > cfg.q_th_ch:
                return False
    return True
