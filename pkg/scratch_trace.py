import numpy as np

from roundsim import sim

cfg = sim.case1_config()
log = sim.run_episode(cfg, run_id=0)
arr = np.array(log.records)
# columns: run_id t id kind r theta v phi lane accel phi_dot delta d_c2b
#          min_pair kind... use CSV_COLUMNS order minus run_id handled in
# records are tuples per CSV_COLUMNS
cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
ids = sorted(set(r[cols["id"]] for r in log.records))
print("statuses:", log.statuses, "steps:", log.n_steps,
      "fallback:", log.fallback_steps)
for vid in ids:
    rs = [r for r in log.records if r[cols["id"]] == vid]
    for r in rs[:: max(1, len(rs) // 14)]:
        print(f"{vid} t={r[cols['t']]:5.1f} r={r[cols['r']]:5.1f} "
              f"th={r[cols['theta']]:5.2f} v={r[cols['v']]:4.2f} "
              f"a={r[cols['accel']]:5.2f} lane={r[cols['lane']]} "
              f"flag={r[cols['safety_flag']]}")
    print()
