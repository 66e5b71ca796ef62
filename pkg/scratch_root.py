import numpy as np

from roundsim import sim
from roundsim.dynamics import decode_action
from roundsim.world import MODE_ARRIVED, MODE_APPROACH, initial_row

cfg = sim.case1_config()
geo = cfg.geometry
specs = cfg.vehicles
search = sim._SearchPolicy(cfg, cfg.risk)
n = len(specs)
rows = np.zeros((n, 5))
modes = np.full(n, -1, dtype=np.int64)
for k in range(70):
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
        seed=k, uncertainty_seed=k, return_tree=True)
    for slot, i in enumerate(act):
        rows[i] = res.av_rows_next[slot]
        modes[i] = int(res.av_modes_next[slot])
        search.prev[i] = (res.controls[slot][0], res.controls[slot][1])
    pos = {i: (rows[i][0], rows[i][1], rows[i][2]) for i in act}
    print(f"k={k:3d} t={t:5.1f} fb={res.fallback} "
          f"safe={res.n_safe_children}/{res.n_children} "
          + " ".join(f"{specs[i].vid}:r={rows[i][0]:5.1f},"
                     f"th={rows[i][1]:5.2f},v={rows[i][2]:4.2f}"
                     for i in act))
    if k in (44, 46, 48, 50, 52):
        root = res.root
        kids = sorted(root.children, key=lambda c: -c.visits)[:8]
        for node in kids:
            val = node.value / node.visits if node.visits else float("nan")
            print(f"   a={node.action} visits={node.visits:3d} "
                  f"mean={val:10.3f} safe={node.safe}")
        vals = [c.value / c.visits for c in root.children if c.visits]
        print(f"   value range: [{min(vals):.2f}, {max(vals):.2f}] "
              f"root visits={root.visits}")
