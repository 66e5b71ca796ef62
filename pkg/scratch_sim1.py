import time
from dataclasses import replace

import numpy as np

from roundsim import sim
from roundsim.mcts import PlannerConfig

t0 = time.perf_counter()
cfg = sim.case1_config()
small = replace(cfg, planner=replace(cfg.planner, iterations=40, d_max=4))
log = sim.run_episode(small, run_id=0)
print("warm+run1:", round(time.perf_counter() - t0, 2), "s")
print("statuses:", log.statuses)
print("n_steps:", log.n_steps, "plan_calls:", log.plan_calls,
      "fallback:", log.fallback_steps)
rep = sim.episode_metrics(log, cfg.geometry)
print("arrival:", rep.arrival_rate, "collision:", rep.collision_rate)
print("pet:", [round(p, 2) for p in rep.pet_values],
      "viol:", rep.pet_violation_rate)
print("deviation:", {k: {m: round(x, 3) for m, x in v.items()}
                     for k, v in rep.deviation.items()})
print("hdv_params:", log.hdv_params)

t0 = time.perf_counter()
full = sim.run_episode(cfg, run_id=1)
print("full case1:", round(time.perf_counter() - t0, 2), "s",
      "statuses:", full.statuses, "fallback:", full.fallback_steps,
      "steps:", full.n_steps)
rep2 = sim.episode_metrics(full, cfg.geometry)
print("pet:", [round(p, 2) for p in rep2.pet_values],
      "viol:", rep2.pet_violation_rate)

# velocity trace sanity
vs = [r[6] for r in full.records if r[3] == "AV"]
print("v mean/max:", round(float(np.mean(vs)), 2), round(float(np.max(vs)), 2))
