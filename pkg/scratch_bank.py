"""Run an episode bank and dump per-seed metrics to JSON for offline analysis.

usage: python3 scratch_bank.py <case1|case2|rop> <n_seeds> <out.json>
           [--policy mcts|ablation_no_adaptive_risk|priority_yield]
           [--dmax N] [--rop-frac F] [--seed-base N]
"""
import argparse
import json
import time
from dataclasses import replace

import numpy as np

from roundsim import sim

ap = argparse.ArgumentParser()
ap.add_argument("case", choices=["case1", "case2", "rop"])
ap.add_argument("n_seeds", type=int)
ap.add_argument("out")
ap.add_argument("--policy", default="mcts")
ap.add_argument("--dmax", type=int, default=8)
ap.add_argument("--rop-frac", type=float, default=0.5)
ap.add_argument("--seed-base", type=int, default=0)
args = ap.parse_args()

cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
runs = []
t00 = time.time()
for i in range(args.n_seeds):
    s = args.seed_base + i
    seeds = sim.Seeds(sim=s, planner=s, uncertainty=s)
    if args.case == "case1":
        cfg = sim.case1_config(seeds=seeds)
    elif args.case == "case2":
        cfg = sim.case2_config(seeds=seeds)
    else:
        cfg = sim.rop_config(args.rop_frac, seeds=seeds)
    cfg = replace(cfg, policy=args.policy,
                  planner=replace(cfg.planner, d_max=args.dmax))
    t0 = time.time()
    log = sim.run_episode(cfg, run_id=s)
    wall = time.time() - t0
    pr = sim.compute_pet(log)
    statuses = log.statuses
    n_coll = sum(1 for v in statuses.values() if v == "collided")
    arrived = sum(1 for v in statuses.values() if v == "arrived")
    # pooled AV velocity samples
    av_ids = {v.vid for v in cfg.vehicles if v.kind == "av"}
    av_v = [r[cols["v"]] for r in log.records if r[cols["id"]] in av_ids]
    dmin = min((r[cols["min_pair_distance"]] for r in log.records
                if r[cols["min_pair_distance"]] > 0), default=float("inf"))
    runs.append({
        "seed": s,
        "collisions": n_coll,
        "arrived": arrived,
        "n_vehicles": len(statuses),
        "fallback_steps": log.fallback_steps,
        "min_pair_distance": dmin,
        "pet_values": [round(v, 4) for v in pr.values],
        "pet_violations": pr.n_violations,
        "av_vel_std": float(np.std(av_v, ddof=1)) if len(av_v) > 1 else 0.0,
        "n_steps": log.n_steps,
        "wall": round(wall, 2),
    })
    print(f"[{args.case}/{args.policy}/d{args.dmax}] seed {s}: "
          f"coll={n_coll} arr={arrived}/{len(statuses)} "
          f"fb={log.fallback_steps} viol={pr.n_violations}/{len(pr.values)} "
          f"dmin={dmin:.2f} {wall:.1f}s", flush=True)

out = {"case": args.case, "policy": args.policy, "dmax": args.dmax,
       "rop_frac": args.rop_frac, "n_seeds": args.n_seeds,
       "seed_base": args.seed_base, "runs": runs,
       "wall_total": round(time.time() - t00, 1)}
with open(args.out, "w") as f:
    json.dump(out, f, indent=1)
print("wrote", args.out, f"total {out['wall_total']}s")
