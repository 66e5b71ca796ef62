import numpy as np
from roundsim.dynamics import IdmParams, VehicleParams
from roundsim.geometry import RoundaboutGeometry
from roundsim.mcts import Planner, PlannerConfig
from roundsim.reward import RewardConfig
from roundsim.risk import RiskConfig
from roundsim.uncertainty import UncertaintyParams
from roundsim.world import VehicleSpec, MODE_CIRCULATE, MODE_APPROACH

geo = RoundaboutGeometry()
planner = Planner(geo, VehicleParams(), IdmParams(), RiskConfig(),
                  RewardConfig(), UncertaintyParams(), PlannerConfig())
av_specs = [VehicleSpec(vid=f"av{k}", kind="AV", entry=k, dest=(k + 2) % 4,
                        spawn_radius=33.0, lane=1, v_init=4.0)
            for k in range(4)]
hdv_specs = [VehicleSpec(vid=f"h{k}", kind="HDV", entry=k, dest=(k + 1) % 4,
                         spawn_radius=33.0, lane=0, v_init=4.0)
             for k in range(4)]
av_rows = np.array([[26.125, 0.3 + 1.5708 * k, 4.0, 0.0, 1.0]
                    for k in range(4)])
av_modes = np.array([MODE_CIRCULATE] * 4)
hdv_rows = np.array([[22.375, 0.3 + 0.7854, 4.0, 0.0, 0.0],
                     [22.375, 0.3 + 0.7854 + 3.1416, 4.0, 0.0, 0.0],
                     [33.0, 3.1416, 4.0, 1.5708, 0.0],
                     [33.0, 4.7124, 4.0, 1.5708, 0.0]])
hdv_modes = np.array([MODE_CIRCULATE, MODE_CIRCULATE,
                      MODE_APPROACH, MODE_APPROACH])

planner._reset_plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                    hdv_specs, 11, 12)
b = planner._evaluate(av_rows, av_modes, np.zeros(4), np.zeros(4),
                      np.zeros((4, 2)), 0, np.zeros(4, dtype=np.int64),
                      np.zeros(4), np.zeros(4, dtype=bool), True)
print("root safe:", b.safe, "qcc_max:", round(b.qcc_max, 4),
      "qch_max:", round(b.qch_max, 4))
traj0 = None
# re-derive per-pair Q_ch contributions
import roundsim._fast as F
rows = np.vstack([av_rows, hdv_rows])
print("pair dist / dsafe (AV i x HDV h):")
print(np.round(b.dist0[:4, 4:], 2))
print(np.round(b.dsafe0[:4, 4:], 2))
