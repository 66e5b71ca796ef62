import sys
import time

from roundsim import sim

n = int(sys.argv[1]) if len(sys.argv) > 1 else 10
which = sys.argv[2] if len(sys.argv) > 2 else "case1"
cfg = {"case1": sim.case1_config, "case2": sim.case2_config}[which]()

t0 = time.perf_counter()
res = sim.run_batch(cfg, n_runs=n, seed_base=0)
el = time.perf_counter() - t0
coll = sum(r.collision_rate for r in res.reports)
arr = [r.arrival_rate for r in res.reports]
fb = [r.fallback_steps for r in res.reports]
pv = [r.pet_violation_rate for r in res.reports]
npet = [len(r.pet_values) for r in res.reports]
print(f"{which} n={n}  wall={el:.1f}s ({el / n:.1f}s/run)")
print(f"collisions: {int(coll)}/{n}")
print(f"arrival rates: {arr}")
print(f"fallback steps: {fb}")
print(f"pet counts: {npet}")
print(f"pet viol rates: {pv}")
bad = [i for i, r in enumerate(res.reports) if r.collision_rate > 0]
if bad:
    for i in bad[:3]:
        print(f"-- seed {i}: statuses {res.reports[i].statuses}")
mn = min((p for r in res.reports for p in r.pet_values), default=None)
print("min PET:", mn)
