import time
import numpy as np
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
                  RewardConfig(), UncertaintyParams(), PlannerConfig())

av_specs = [VehicleSpec(vid=f"av{k}", kind="AV", entry=k, dest=(k + 2) % 4,
                        spawn_radius=33.0, lane=1, v_init=4.0)
            for k in range(4)]
hdv_specs = [VehicleSpec(vid=f"h{k}", kind="HDV", entry=k, dest=(k + 1) % 4,
                         spawn_radius=33.0, lane=0, v_init=4.0)
             for k in range(4)]
av_rows = np.array([[26.125, 0.7854 + 1.5708 * k, 4.0, 0.0, 1.0]
                    for k in range(4)])
av_modes = np.array([MODE_CIRCULATE] * 4)
# all four HDVs still on their entry legs
hdv_rows = np.array([[35.5, 0.0, 4.0, 1.5708, 0.0],
                     [35.5, 1.5708, 4.0, 1.5708, 0.0],
                     [35.5, 3.1416, 4.0, 1.5708, 0.0],
                     [35.5, 4.7124, 4.0, 1.5708, 0.0]])
hdv_modes = np.array([MODE_APPROACH] * 4)

_fast.warmup()
for rep in range(3):
    t0 = time.perf_counter()
    res = planner.plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                       hdv_specs, np.zeros((4, 2)), seed=11,
                       uncertainty_seed=12)
    dt_ms = (time.perf_counter() - t0) * 1e3
    print(f"plan {dt_ms:7.1f} ms  actions={res.actions} "
          f"fallback={res.fallback} safe={res.n_safe_children}/{res.n_children}")
if res.root is not None:
    kids = sorted(res.root.children, key=lambda c: -c.visits)
    print("top visits:", [c.visits for c in kids[:8]])
    print("best action:", kids[0].action, "mean", round(kids[0].mean_value, 3))
