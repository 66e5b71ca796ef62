import sys

from roundsim import sim

which = sys.argv[1] if len(sys.argv) > 1 else "case2"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
times = [float(x) for x in sys.argv[3].split(",")] if len(sys.argv) > 3 \
    else [15.2]

cfg_fn = {"case1": sim.case1_config, "case2": sim.case2_config}[which]
cfg = cfg_fn(seeds=sim.Seeds(sim=seed, planner=seed, uncertainty=seed))
log = sim.run_episode(cfg, run_id=seed)
cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
for t_want in times:
    print(f"--- t={t_want}")
    for r in log.records:
        if abs(r[cols["t"]] - t_want) > 1e-9:
            continue
        print(f"  {r[cols['id']]:>5} r={r[cols['r']]:6.2f} "
              f"th={r[cols['theta']]:5.2f} v={r[cols['v']]:4.2f} "
              f"phi={r[cols['phi']]:5.2f} ln={int(r[cols['lane']])} "
              f"a={r[cols['accel']]:5.2f} pd={r[cols['phi_dot']]:5.2f} "
              f"dmin={r[cols['min_pair_distance']]:6.2f} "
              f"fl={int(r[cols['safety_flag']])}")
