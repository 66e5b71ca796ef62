import sys

from roundsim import sim

which = sys.argv[1] if len(sys.argv) > 1 else "case2"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
vid = sys.argv[3] if len(sys.argv) > 3 else "hdv0"
t0 = float(sys.argv[4]) if len(sys.argv) > 4 else 0.0
t1 = float(sys.argv[5]) if len(sys.argv) > 5 else 1e9

cfg_fn = {"case1": sim.case1_config, "case2": sim.case2_config}[which]
cfg = cfg_fn(seeds=sim.Seeds(sim=seed, planner=seed, uncertainty=seed))
log = sim.run_episode(cfg, run_id=seed)
cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
print("statuses:", log.statuses)
for r in log.records:
    if r[cols["id"]] != vid or not (t0 <= r[cols["t"]] <= t1):
        continue
    print(f"t={r[cols['t']]:5.1f} r={r[cols['r']]:6.2f} "
          f"th={r[cols['theta']]:5.2f} v={r[cols['v']]:4.2f} "
          f"phi={r[cols['phi']]:5.2f} ln={int(r[cols['lane']])} "
          f"a={r[cols['accel']]:5.2f} pd={r[cols['phi_dot']]:5.2f} "
          f"dl={int(r[cols['lane_delta']])} d_c2b={r[cols['d_c2b']]:5.2f} "
          f"dmin={r[cols['min_pair_distance']]:5.2f} "
          f"fl={int(r[cols['safety_flag']])}")
