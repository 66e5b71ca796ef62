import numpy as np

from roundsim.dynamics import IdmParams, VehicleParams
from roundsim.geometry import RoundaboutGeometry
from roundsim.mcts import Planner, PlannerConfig
from roundsim.reward import RewardConfig
from roundsim.risk import RiskConfig
from roundsim.uncertainty import UncertaintyParams
from roundsim.world import (KIND_AV, KIND_HDV, MODE_APPROACH, MODE_CIRCULATE,
                            VehicleSpec)

geo = RoundaboutGeometry()
planner = Planner(geo, VehicleParams(), IdmParams(), RiskConfig(),
                  RewardConfig(), UncertaintyParams(), PlannerConfig(),
                  dt=0.1)

av_specs = [
    VehicleSpec("av0", KIND_AV, entry=0, dest=2, spawn_radius=33.0, lane=1,
                v_init=4.0),
    VehicleSpec("av1", KIND_AV, entry=1, dest=3, spawn_radius=33.0, lane=1,
                v_init=4.0),
]
hdv_specs = [
    VehicleSpec("hdv0", KIND_HDV, entry=3, dest=1, spawn_radius=33.0, lane=1,
                v_init=4.0),
]
av_rows = np.array([
    [geo.lane_center(1), 0.45, 4.0, 0.0, 1.0],
    [31.5, geo.exit_angles[1], 4.0, np.pi / 2, 1.0],
])
av_modes = np.array([MODE_CIRCULATE, MODE_APPROACH])
hdv_rows = np.array([
    [geo.lane_center(1), 2.2, 4.0, 0.0, 1.0],
])
hdv_modes = np.array([MODE_CIRCULATE])
prev = np.zeros((2, 2))

planner._reset_plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                    hdv_specs, 7, 11)
b = planner._evaluate(av_rows, av_modes, prev[:, 0].copy(),
                      prev[:, 1].copy(), prev, 0,
                      np.zeros(2, dtype=np.int64), np.zeros(2),
                      np.zeros(2, dtype=bool), compute_cih=True)
print("root safe:", b.safe, "qcc_max:", b.qcc_max, "qch_max:", b.qch_max)
print("bdist:", b.bdist)
print("dist0:\n", np.round(b.dist0, 3))
print("dsafe0:\n", np.round(b.dsafe0, 3))
arc = (1.25 - 0.45) * geo.lane_center(1)
print("arc between av0 and hdv0:", arc)
