from dataclasses import replace

import numpy as np

from roundsim import sim
from roundsim.mcts import Planner
from roundsim.risk import RiskConfig
from roundsim.world import MODE_NAMES

cfg = sim.case1_config()


def probe(cfg, label, steps=80):
    geo = cfg.geometry
    specs = cfg.vehicles
    import numpy as np
    from roundsim.world import initial_row, MODE_APPROACH, MODE_ARRIVED
    from roundsim import sim as S
    search = sim._SearchPolicy(cfg, cfg.risk)
    n = len(specs)
    rows = np.zeros((n, 5))
    modes = np.full(n, -1, dtype=np.int64)
    for k in range(steps):
        t = k * cfg.dt
        for i in range(n):
            if modes[i] == -1 and cfg.spawn_times[i] <= t + 1e-9:
                rows[i] = initial_row(specs[i], geo)
                modes[i] = MODE_APPROACH
        act = [i for i in range(n) if -1 < modes[i] < MODE_ARRIVED]
        if not act:
            continue
        res = search.planner.plan(
            rows[act], modes[act], [specs[i] for i in act],
            np.zeros((0, 5)), np.zeros(0, dtype=np.int64), [],
            np.array([search.prev.get(i, (0.0, 0.0)) for i in act]),
            seed=k, uncertainty_seed=k)
        for slot, i in enumerate(act):
            rows[i] = res.av_rows_next[slot]
            modes[i] = int(res.av_modes_next[slot])
            search.prev[i] = (res.controls[slot][0], res.controls[slot][1])
        if k % 5 == 0 or res.fallback:
            state = " | ".join(
                f"{specs[i].vid}:{MODE_NAMES[int(modes[i])][:4]} "
                f"r={rows[i][0]:.1f} th={rows[i][1]:.2f} v={rows[i][2]:.2f}"
                for i in act)
            print(f"{label} k={k:3d} fb={int(res.fallback)} "
                  f"safe={res.n_safe_children}/{res.n_children}  {state}")
        if res.fallback and k > 30:
            break


probe(cfg, "case1-dt0.2", steps=60)
