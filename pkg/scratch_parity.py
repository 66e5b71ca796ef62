import os, sys, time
import numpy as np

def run():
    from roundsim import _fast
    from roundsim.dynamics import IdmParams, VehicleParams
    from roundsim.geometry import RoundaboutGeometry
    from roundsim.mcts import Planner, PlannerConfig
    from roundsim.reward import RewardConfig
    from roundsim.risk import RiskConfig
    from roundsim.uncertainty import UncertaintyParams
    from roundsim.world import VehicleSpec, MODE_CIRCULATE, MODE_APPROACH

    geo = RoundaboutGeometry()
    planner = Planner(geo, VehicleParams(), IdmParams(), RiskConfig(),
                      RewardConfig(), UncertaintyParams(),
                      PlannerConfig(iterations=40, d_max=4))
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
    res = planner.plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                       hdv_specs, np.zeros((2, 2)), seed=5,
                       uncertainty_seed=6, return_tree=True)
    kids = sorted(res.root.children, key=lambda c: (-c.visits, c.action))
    print("actions:", res.actions, "fallback:", res.fallback)
    print("visits:", [c.visits for c in kids[:6]])
    print("values:", [round(c.value, 9) for c in kids[:6]])
    print("gmin/gmax:", round(planner._gmin, 12), round(planner._gmax, 12))

run()
