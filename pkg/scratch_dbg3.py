import os
os.environ["ROUNDSIM_NO_NUMBA"] = "1"
import numpy as np
from roundsim import _fast
from roundsim.dynamics import IdmParams, VehicleParams
from roundsim.geometry import RoundaboutGeometry
from roundsim.mcts import Planner, PlannerConfig, _SENTINEL_R0, _SENTINEL_SPACING
from roundsim.reward import RewardConfig
from roundsim.risk import RiskConfig
from roundsim.uncertainty import UncertaintyParams
from roundsim.world import VehicleSpec, MODE_CIRCULATE, MODE_APPROACH

geo = RoundaboutGeometry()
for dmax in (4, 8):
    planner = Planner(geo, VehicleParams(), IdmParams(), RiskConfig(),
                      RewardConfig(), UncertaintyParams(),
                      PlannerConfig(iterations=40, d_max=dmax))
    av_specs = [VehicleSpec(vid="a0", kind="AV", entry=0, dest=2,
                            spawn_radius=33.0, lane=1, v_init=4.0),
                VehicleSpec(vid="a1", kind="AV", entry=1, dest=3,
                            spawn_radius=33.0, lane=1, v_init=4.0)]
    hdv_specs = [VehicleSpec(vid="h0", kind="HDV", entry=2, dest=0,
                             spawn_radius=33.0, lane=0, v_init=4.0)]
    av_rows = np.array([[26.125, 0.45, 4.0, 0.0, 1.0],
                        [31.5, 1.5708, 4.0, 1.5708, 1.0]])
    av_modes = np.array([MODE_CIRCULATE, MODE_APPROACH])
    hdv_rows = np.array([[22.375, 2.2, 4.0, 0.0, 0.0]])
    hdv_modes = np.array([MODE_CIRCULATE])
    planner._reset_plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                        hdv_specs, 5, 6)
    root_bundle = planner._evaluate(av_rows, av_modes, np.zeros(2),
                                    np.zeros(2), np.zeros((2, 2)), 0,
                                    np.zeros(2, dtype=np.int64), np.zeros(2),
                                    np.zeros(2, dtype=bool), False)
    from roundsim.mcts import TreeNode
    root = TreeNode(0, None, None, av_rows, av_modes, np.zeros((2, 2)),
                    True, 0.0, root_bundle, planner._node_rng())
    child = planner._expand(root)      # all-cruise head
    print(f"--- d_max={dmax} child action {child.action} safe={child.safe}")
    # replicate rollout_eval with instrumentation
    n_eval = dmax - 1
    t_risk = planner._t_risk
    hdv_block = np.ascontiguousarray(
        planner._cache[:, 1:1 + n_eval + t_risk + 1])
    sp = planner._score_params
    out = _fast.rollout_eval(
        child.rows, child.modes, child.ctrl, n_eval, hdv_block,
        planner._merge_rs, planner._entry_angles, planner._dest_angles,
        planner._dest_idx, planner._lengths, planner._widths,
        planner._is_av, planner.av_params.a_med, False,
        *planner._risk_scalars, geo.v_max, geo.r_inner, geo.r_outer,
        planner._exit_angles, geo.leg_half_width, geo.leg_end_radius,
        t_risk, planner._lane_centers, sp, planner._shapley_flag,
        1e3, _SENTINEL_R0, _SENTINEL_SPACING)
    print("rollout_eval ->", out)

print("\nchild bundle: qcc", round(child.bundle.qcc_max, 4),
      "qch", round(child.bundle.qch_max, 4),
      "bdist", np.round(child.bundle.bdist, 3))
# grandchild expansion probe: expand a few children of the (unsafe) head
for n in range(3):
    gc = planner._expand(child)
    if gc is None:
        break
    print("grandchild", gc.action, "safe", gc.safe,
          "qch", round(gc.bundle.qch_max, 4), "bdist",
          np.round(gc.bundle.bdist, 3))
