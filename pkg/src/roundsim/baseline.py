"""Non-search comparison policies for the evaluation harness.

Two reference conditions are provided: a rule-based priority/yield
controller, and a configuration transform that strips the adaptive parts
out of the risk evaluation while keeping the search itself intact.
Externally produced planners (game-theoretic baselines from other
codebases) are compared through their episode CSVs instead of being
re-implemented here.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dynamics import IdmParams, VehicleParams, lane_keep_phidot
from .geometry import RoundaboutGeometry, wrap_angle
from .risk import RiskConfig
from .world import MODE_APPROACH, MODE_CIRCULATE, VehicleSpec, nominal_accel

POLICY_KINDS = ("mcts", "ablation_no_adaptive_risk", "priority_yield")

# upstream angular window that forces an entering vehicle to yield, rad
DEFAULT_YIELD_WINDOW = 0.6


def ablation_risk_config(cfg: RiskConfig) -> RiskConfig:
    """Risk configuration with the adaptive machinery disabled.

    The pairwise safe distance is pinned to d_base, losing the relative
    speed, heading, lane, and shared-zone growth, and the sampled
    collision-probability term is dropped (the planner skips its
    evaluation when `adaptive` is off). Risk weights are untouched, so
    the remaining terms are compared against the same thresholds.
    """
    return replace(cfg, adaptive=False)


def priority_yield_policy(idx: int, rows: np.ndarray, modes: np.ndarray,
                          specs: list[VehicleSpec], geo: RoundaboutGeometry,
                          idm: IdmParams, params: VehicleParams,
                          window: float = DEFAULT_YIELD_WINDOW
                          ) -> tuple[float, float, int]:
    """Rule-based control for one vehicle: circulating traffic has priority.

    An entering vehicle brakes at the hard bound while any circulating
    vehicle sits within `window` radians upstream of its entry; otherwise
    every mode tracks the desired speed behind its leader (IDM) with
    lane-keeping steering. Lane changes are never commanded.

    Returns (accel, phi_dot, lane_delta) with lane_delta always 0.
    """
    a = nominal_accel(idx, rows, modes, specs, geo, idm, yield_rule=None)
    mode = int(modes[idx])
    if mode == MODE_APPROACH:
        entry_angle = geo.exit_angles[specs[idx].entry]
        for j in range(len(specs)):
            if j == idx or modes[j] != MODE_CIRCULATE:
                continue
            if wrap_angle(entry_angle - rows[j][1]) <= window:
                a = -params.a_max
                break
        return a, 0.0, 0
    if mode == MODE_CIRCULATE:
        pd = lane_keep_phidot(rows[idx][0], rows[idx][3],
                              geo.lane_center(int(rows[idx][4])), idm)
        return a, pd, 0
    return a, 0.0, 0
