import time
import numpy as np

from roundsim.dynamics import IdmParams, VehicleParams, decode_action
from roundsim.geometry import RoundaboutGeometry
from roundsim.mcts import Planner, PlannerConfig
from roundsim.reward import RewardConfig
from roundsim.risk import RiskConfig
from roundsim.uncertainty import UncertaintyParams
from roundsim.world import (KIND_AV, KIND_HDV, MODE_APPROACH, MODE_CIRCULATE,
                            VehicleSpec)

geo = RoundaboutGeometry()
avp = VehicleParams()
idm = IdmParams()
rcfg = RiskConfig()
wcfg = RewardConfig()
ucfg = UncertaintyParams()
pcfg = PlannerConfig()

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
# av0 circulating in outer lane just past its entry; av1 still approaching;
# hdv0 circulating half a quadrant ahead of av0
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

planner = Planner(geo, avp, idm, rcfg, wcfg, ucfg, pcfg, dt=0.1)

t0 = time.perf_counter()
res1 = planner.plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                    hdv_specs, prev, seed=7, uncertainty_seed=11,
                    return_tree=True)
t1 = time.perf_counter()
res2 = planner.plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                    hdv_specs, prev, seed=7, uncertainty_seed=11,
                    return_tree=True)
t2 = time.perf_counter()
res3 = planner.plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                    hdv_specs, prev, seed=8, uncertainty_seed=11)
t3 = time.perf_counter()

print(f"plan#1 {1e3 * (t1 - t0):.0f} ms (includes jit warm)")
print(f"plan#2 {1e3 * (t2 - t1):.0f} ms")
print(f"plan#3 {1e3 * (t3 - t2):.0f} ms")
print("deterministic:", res1.actions == res2.actions)
print("actions:", res1.actions, "->",
      [decode_action(a, avp) for a in res1.actions])
print("fallback:", res1.fallback, " safe/children:",
      res1.n_safe_children, "/", res1.n_children)

root = res1.root
print("root visits:", root.visits)
vis = sorted((c.visits for c in root.children), reverse=True)
print("top child visits:", vis[:10], " total children:", len(vis))
best = max((c for c in root.children if c.safe), key=lambda c: c.visits)
print("best child visits:", best.visits, "mean value:",
      f"{best.mean_value:.4f}", "action:", best.action)

# audit: unsafe nodes never expanded; visits consistency
stack = [root]
bad = 0
nodes = 0
while stack:
    n = stack.pop()
    nodes += 1
    if not n.safe and n.children:
        bad += 1
    stack.extend(n.children)
print("nodes:", nodes, "unsafe-expanded violations:", bad)
print("child visit sum == root visits - 1 + unexpanded:",
      sum(c.visits for c in root.children), root.visits)
