import math
import sys

import numpy as np

from roundsim import sim
from roundsim.geometry import footprint
from roundsim._fast import rect_dist

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
pair = sys.argv[2].split(",") if len(sys.argv) > 2 else None

cfg = sim.case2_config(seeds=sim.Seeds(sim=seed, planner=seed,
                                       uncertainty=seed))
log = sim.run_episode(cfg, run_id=seed)
cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
print("statuses:", log.statuses, "steps:", log.n_steps,
      "fallback:", log.fallback_steps)

if pair is None:
    pair = [v for v, s in log.statuses.items() if s == "collided"]
print("pair:", pair)
if len(pair) < 2:
    sys.exit(0)
a, b = pair[0], pair[1]
dims = {s.vid: (s.length, s.width) for s in log.specs}

by_t = {}
for r in log.records:
    by_t.setdefault(r[cols["t"]], {})[r[cols["id"]]] = r

ts = sorted(by_t)
rows = []
for t in ts:
    snap = by_t[t]
    if a in snap and b in snap:
        ra, rb = snap[a], snap[b]
        va = footprint(ra[cols["r"]], ra[cols["theta"]], ra[cols["phi"]],
                       *dims[a])
        vb = footprint(rb[cols["r"]], rb[cols["theta"]], rb[cols["phi"]],
                       *dims[b])
        d = rect_dist(va, vb)
        rows.append((t, d, ra, rb))

rows.sort()
tail = [r for r in rows if r[1] < 6.0][:40] or rows[-12:]
for t, d, ra, rb in tail:
    print(f"t={t:5.1f} d={d:5.2f} | "
          f"{a}: r={ra[cols['r']]:5.2f} th={ra[cols['theta']]:5.2f} "
          f"v={ra[cols['v']]:4.2f} phi={ra[cols['phi']]:5.2f} "
          f"ln={int(ra[cols['lane']])} m?a={ra[cols['accel']]:5.1f} | "
          f"{b}: r={rb[cols['r']]:5.2f} th={rb[cols['theta']]:5.2f} "
          f"v={rb[cols['v']]:4.2f} phi={rb[cols['phi']]:5.2f} "
          f"ln={int(rb[cols['lane']])} a={rb[cols['accel']]:5.1f}")
