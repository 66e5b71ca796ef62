import sys

import numpy as np

from roundsim import sim

which = sys.argv[1] if len(sys.argv) > 1 else "case1"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
cfg_fn = {"case1": sim.case1_config, "case2": sim.case2_config}[which]
cfg = cfg_fn(seeds=sim.Seeds(sim=seed, planner=seed, uncertainty=seed))
log = sim.run_episode(cfg, run_id=seed)
cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
print("statuses:", log.statuses, "steps:", log.n_steps,
      "fallback:", log.fallback_steps)
ids = sorted(set(r[cols["id"]] for r in log.records))
for vid in ids:
    rs = [r for r in log.records if r[cols["id"]] == vid]
    if log.statuses.get(vid) == "arrived":
        last = rs[-1]
        print(f"{vid}: arrived t={last[cols['t']]:5.1f}")
        continue
    for r in rs[:: max(1, len(rs) // 12)]:
        print(f"{vid} t={r[cols['t']]:5.1f} r={r[cols['r']]:5.1f} "
              f"th={r[cols['theta']]:5.2f} v={r[cols['v']]:4.2f} "
              f"a={r[cols['accel']]:5.2f} lane={int(r[cols['lane']])} "
              f"flag={int(r[cols['safety_flag']])}")
    print()
pr = sim.compute_pet(log)
print("pet:", [round(v, 2) for v in pr.values])
