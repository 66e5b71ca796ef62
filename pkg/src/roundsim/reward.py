"""Multi-objective reward: safety, efficiency, comfort, and lane terms,
cooperative aggregation through exact Shapley values, and the online update
of HDV cooperation coefficients.

Sign convention: every component is a penalty (<= 0) except the exit bonus
at the destination; a lone vehicle on its lane center at desired speed with
zero controls far from exits scores exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

from .dynamics import VehicleState
from .errors import InvalidParameterError, InvalidStateError, SizeLimitError
from .geometry import RoundaboutGeometry, angle_diff, cartesian, footprint
from .risk import (INFEASIBLE, RiskConfig, boundary_penalty, risk_cc, risk_ch,
                   temporal_risk, lane_change_margin)

SHAPLEY_MAX_AGENTS = 8


@dataclass(frozen=True)
class RewardConfig:
    # top-level mixture over (safety, efficiency, comfort, lane)
    w1: float = 0.4
    w2: float = 0.3
    w3: float = 0.1
    w4: float = 0.2
    # safety sub-weights and risk couplings
    w_c2c: float = 1.0
    w_c2r: float = 1.0
    w_c2h: float = 1.0
    lambda_t: float = 0.5     # extra temporal-risk coupling in Q_c2c
    lambda_c: float = 1.0     # extra collision-probability coupling in Q_c2h
    # lane terms
    w_inner: float = 0.1
    w_outer: float = 0.1
    w_trans: float = 0.1
    w_exit: float = 0.5
    sigma_exit: float = 0.3   # angular width of the exit bonus, rad
    # efficiency terms
    v_des: float = 5.0
    a_des: float = 0.0
    v_tol: float = 0.5
    alpha_v: float = 0.5      # over-speed slope
    beta_v: float = 0.5       # under-speed slope
    w_acc: float = 0.05
    w_path: float = 0.1
    # comfort terms
    w_jerk: float = 0.01
    w_curvature: float = 0.01
    w_centripetal: float = 0.1
    a_cent_des: float = 1.0
    # aggregation
    gamma_r: float = 0.95     # planner discount
    mu: float = 0.05          # adaptive-update learning rate
    lambda_init: float = 0.5  # initial cooperation coefficient
    gamma_h_init: float = 0.95
    shapley_mode: str = "normalized"   # raw | normalized | uniform

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3, self.w4, self.w_c2c, self.w_c2r,
               self.w_c2h, self.lambda_t, self.lambda_c, self.w_inner,
               self.w_outer, self.w_trans, self.w_exit, self.w_acc,
               self.w_path, self.w_jerk, self.w_curvature,
               self.w_centripetal, self.alpha_v, self.beta_v) < 0:
            raise InvalidParameterError("reward weights must be >= 0")
        if not 0.0 < self.gamma_r <= 1.0:
            raise InvalidParameterError("gamma_r must lie in (0, 1]")
        if not 0.0 <= self.lambda_init <= 1.0:
            raise InvalidParameterError("lambda_init must lie in [0, 1]")
        if self.v_tol < 0:
            raise InvalidParameterError("v_tol must be >= 0")
        if self.shapley_mode not in ("raw", "normalized", "uniform"):
            raise InvalidParameterError(
                f"unknown shapley_mode {self.shapley_mode!r}")


def q_velocity(v: float, v_des: float, cfg: RewardConfig) -> float:
    """Deadband speed-tracking penalty with separate over/under slopes."""
    dv = v - v_des
    if abs(dv) <= cfg.v_tol:
        return 0.0
    if dv > cfg.v_tol:
        return -cfg.alpha_v * (dv - cfg.v_tol)
    return -cfg.beta_v * abs(dv)


def q_efficiency(state: VehicleState, accel: float, ref_radius: float,
                 cfg: RewardConfig, circulating: bool = True) -> float:
    """Speed tracking plus acceleration and path-offset penalties.

    ref_radius is the reference-path radius at the vehicle's azimuth (its
    lane center), so the path offset reduces to the radial error. On the
    legs (circulating=False) the reference path is the leg rail, which the
    kinematics ride exactly, so the offset term is zero.
    """
    if circulating:
        px, py = cartesian(state.r, state.theta)
        rx, ry = cartesian(ref_radius, state.theta)
        off2 = (px - rx) ** 2 + (py - ry) ** 2
    else:
        off2 = 0.0
    return (q_velocity(state.v, cfg.v_des, cfg)
            - cfg.w_acc * (accel - cfg.a_des) ** 2
            - cfg.w_path * off2)


def q_comfort(state: VehicleState, accel: float, phi_dot: float,
              accel_prev: float, phi_dot_prev: float, dt: float,
              cfg: RewardConfig, circulating: bool = True) -> float:
    """Jerk, steering-rate change, and centripetal deviation penalties.

    The centripetal target only applies on the ring; straight legs carry
    no curvature demand.
    """
    if state.r <= 0.0:
        raise InvalidStateError(f"radius must be positive, got {state.r}")
    jerk = (accel - accel_prev) / dt
    phi_dd = (phi_dot - phi_dot_prev) / dt
    cent = (state.v * state.v / state.r - cfg.a_cent_des
            if circulating else 0.0)
    return (-cfg.w_jerk * jerk * jerk
            - cfg.w_curvature * phi_dd * phi_dd
            - cfg.w_centripetal * cent * cent)


def q_lane(state: VehicleState, delta: int, geo: RoundaboutGeometry,
           destination_exit: int, dims, neighbors,
           cfg: RewardConfig, risk_cfg: RiskConfig,
           circulating: bool = True) -> float:
    """Lane-keeping, lane-change caution, and exit-alignment terms.

    neighbors: list of (VehicleState, dims) pairs; only target-lane members
    matter, through the lane-change safety margin. Lane-keeping and exit
    alignment only apply on the ring: a vehicle on a leg has no lane-center
    error and its azimuth is pinned to the leg, so comparing it against
    exit angles carries no information.
    """
    value = 0.0
    if circulating:
        w_pos = cfg.w_inner if state.lane == 0 else cfg.w_outer
        off = state.r - geo.lane_center(state.lane)
        value -= w_pos * off * off
        for k, ang in enumerate(geo.exit_angles):
            g_k = 1.0 if k == destination_exit else -1.0
            d = angle_diff(state.theta, ang)
            value += cfg.w_exit * g_k * math.exp(
                -(d * d) / (2.0 * cfg.sigma_exit ** 2))
    if delta != 0:
        target = state.lane + delta
        if 0 <= target < geo.n_lanes:
            m = lane_change_margin(state, dims, target, neighbors,
                                   risk_cfg, geo)
            value -= cfg.w_trans * float(delta * delta) * m
        else:
            value -= cfg.w_trans * float(delta * delta)
    return value


def q_safety(i: int, av_states, av_dims, av_trajs,
             hdv_states, hdv_dims, hdv_trajs, hdv_means_next,
             c_ih: dict, boundary_clearance: float,
             cfg: RewardConfig, risk_cfg: RiskConfig,
             geo: RoundaboutGeometry):
    """Safety reward of AV i: negated pairwise risks plus boundary penalty.

    Returns INFEASIBLE when the boundary penalty is infeasible (node-level
    prune). boundary_clearance is the precomputed d_c2b of AV i.
    """
    q_c2r = boundary_penalty(boundary_clearance, risk_cfg)
    if q_c2r is INFEASIBLE:
        return INFEASIBLE
    q_c2c = 0.0
    for j in range(len(av_states)):
        if j == i:
            continue
        q = risk_cc(av_states[i], av_states[j], av_trajs[i], av_trajs[j],
                    av_dims[i], av_dims[j], risk_cfg, geo)
        r_t = temporal_risk(av_trajs[i], av_trajs[j], av_dims[i], av_dims[j],
                            risk_cfg, geo)
        q_c2c -= q + cfg.lambda_t * r_t
    q_c2h = 0.0
    for h in range(len(hdv_states)):
        q = risk_ch(av_states[i], hdv_means_next[h], av_trajs[i],
                    hdv_trajs[h], c_ih[(i, h)], av_dims[i], hdv_dims[h],
                    risk_cfg, geo)
        q_c2h -= q + cfg.lambda_c * c_ih[(i, h)]
    return cfg.w_c2c * q_c2c + cfg.w_c2r * q_c2r + cfg.w_c2h * q_c2h


def self_reward(q_saf, q_eff: float, q_com: float, q_lan: float,
                cfg: RewardConfig):
    """Weighted self-interest bundle; propagates INFEASIBLE."""
    if q_saf is INFEASIBLE:
        return INFEASIBLE
    return cfg.w1 * q_saf + cfg.w2 * q_eff + cfg.w3 * q_com + cfg.w4 * q_lan


def individual_reward(q_self, q_others: list, lambda_i: float,
                      n_agents: int, cfg: RewardConfig):
    """Cooperative blend: [Q_self + lambda_i * sum(Q_other)] normalized by
    1 + lambda_i * (N - 1). q_others are the other agents' safety +
    efficiency + lane sums (comfort excluded by convention)."""
    if q_self is INFEASIBLE or any(q is INFEASIBLE for q in q_others):
        return INFEASIBLE
    return (q_self + lambda_i * sum(q_others)) / (
        1.0 + lambda_i * (n_agents - 1))


def shapley(coalition_value, agents: tuple) -> dict:
    """Exact Shapley values by permutation enumeration.

    coalition_value maps a frozenset of agents to a float; must satisfy
    v(empty) = 0 for the standard axioms.
    """
    n = len(agents)
    if n > SHAPLEY_MAX_AGENTS:
        raise SizeLimitError(
            f"exact Shapley enumeration capped at {SHAPLEY_MAX_AGENTS} "
            f"agents, got {n}")
    if n == 0:
        return {}
    values = {a: 0.0 for a in agents}
    count = 0
    for order in permutations(agents):
        prev = 0.0
        members = set()
        for a in order:
            members.add(a)
            v = coalition_value(frozenset(members))
            values[a] += v - prev
            prev = v
        count += 1
    return {a: values[a] / count for a in agents}


def shapley_weights(phi: list[float], mode: str) -> list[float]:
    """Turn raw Shapley values into aggregation weights.

    raw: the values themselves; normalized: |phi| / sum|phi| (uniform when
    the mass underflows); uniform: 1/N.
    """
    n = len(phi)
    if n == 0:
        return []
    if mode == "raw":
        return list(phi)
    if mode == "uniform":
        return [1.0 / n] * n
    if mode == "normalized":
        total = sum(abs(p) for p in phi)
        if total < 1e-12:
            return [1.0 / n] * n
        return [abs(p) / total for p in phi]
    raise InvalidParameterError(f"unknown shapley_mode {mode!r}")


def immediate_reward(av_rewards: list, cfg: RewardConfig):
    """Joint one-step reward: Shapley-weighted sum of per-AV cooperative
    rewards. With the additive coalition value v(c) = sum of members'
    rewards, each AV's Shapley value equals its own reward exactly (a test
    cross-checks this against brute-force enumeration), so the weights are
    derived directly from av_rewards."""
    if any(r is INFEASIBLE for r in av_rewards):
        return INFEASIBLE
    if not av_rewards:
        return 0.0
    weights = shapley_weights(list(av_rewards), cfg.shapley_mode)
    return sum(w * r for w, r in zip(weights, av_rewards))


def adaptive_update(lambda_h: float, gamma_h: float, actual_accel: float,
                    predictor, mu: float, eps: float = 0.05
                    ) -> tuple[float, float]:
    """One gradient-free update of an HDV's cooperation coefficient and
    discount from the squared one-step action prediction error.

    predictor(lam, gam) -> predicted acceleration; the gradient of
    (predicted - actual)^2 is estimated by central differences at +-eps and
    both parameters stay clamped to [0, 1].
    """

    def err(lam, gam):
        e = predictor(lam, gam) - actual_accel
        return e * e

    g_lam = (err(min(lambda_h + eps, 1.0), gamma_h)
             - err(max(lambda_h - eps, 0.0), gamma_h)) / (2.0 * eps)
    g_gam = (err(lambda_h, min(gamma_h + eps, 1.0))
             - err(lambda_h, max(gamma_h - eps, 0.0))) / (2.0 * eps)
    new_lam = min(max(lambda_h - mu * g_lam, 0.0), 1.0)
    new_gam = min(max(gamma_h - mu * g_gam, 0.0), 1.0)
    return new_lam, new_gam
