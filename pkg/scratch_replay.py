import sys

import numpy as np

from roundsim import sim
from roundsim.dynamics import decode_action
from roundsim.world import MODE_ARRIVED

which = sys.argv[1] if len(sys.argv) > 1 else "case1"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
t_probe = float(sys.argv[3]) if len(sys.argv) > 3 else 18.0
cfg_fn = {"case1": sim.case1_config, "case2": sim.case2_config}[which]
cfg = cfg_fn(seeds=sim.Seeds(sim=seed, planner=seed, uncertainty=seed))
log = sim.run_episode(cfg, run_id=seed)
cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
specs = {s.vid: s for s in cfg.vehicles}
order = [s.vid for s in cfg.vehicles]

rows, modes, use = {}, {}, []
prev = {}
for rec, md in zip(log.records, log.modes):
    if abs(rec[cols["t"]] - t_probe) < 1e-9:
        vid = rec[cols["id"]]
        rows[vid] = [rec[cols["r"]], rec[cols["theta"]], rec[cols["v"]],
                     rec[cols["phi"]], rec[cols["lane"]]]
        modes[vid] = md
        prev[vid] = (rec[cols["accel"]], rec[cols["phi_dot"]])
active = [v for v in order if v in rows and modes[v] < MODE_ARRIVED
          and specs[v].kind == "AV"]
print("active:", active)
for v in active:
    print(f"  {v} row={np.round(rows[v], 3)} mode={modes[v]} prev={prev[v]}")

search = sim._SearchPolicy(cfg, cfg.risk)
k = int(round(t_probe / cfg.dt))      # plan that produced state at t used
pseed = sim._stream_seed(seed, sim._STREAM_PLANNER, k)
useed = sim._stream_seed(seed, sim._STREAM_UNCERTAINTY, k)
res = search.planner.plan(
    np.array([rows[v] for v in active]),
    np.array([modes[v] for v in active], dtype=np.int64),
    [specs[v] for v in active], np.zeros((0, 5)),
    np.zeros(0, dtype=np.int64), [],
    np.array([prev[v] for v in active]), seed=int(pseed),
    uncertainty_seed=int(useed), return_tree=True)
print("fallback", res.fallback, "safe", res.n_safe_children, "/",
      res.n_children, "chosen", res.actions)
par = search.planner.av_params
for node in sorted(res.root.children, key=lambda c: -c.visits)[:12]:
    dec = [round(decode_action(a, par)[0], 1) for a in node.action]
    print(f"acc={dec} visits={node.visits:3d} "
          f"mean={node.value / max(node.visits, 1):9.4f} safe={node.safe} "
          f"imm={node.reward:8.4f}")

slot = int(sys.argv[4]) if len(sys.argv) > 4 else len(active) - 1
groups = {}
for node in res.root.children:
    a = round(decode_action(node.action[slot], par)[0], 1)
    g = groups.setdefault(a, [0, 0, -1e18, None])
    g[0] += 1
    g[1] += node.visits
    m = node.value / max(node.visits, 1)
    if m > g[2]:
        g[2] = m
        g[3] = [round(decode_action(x, par)[0], 1) for x in node.action]
print(f"\nby {active[slot]} accel: n, visits, best mean, best combo")
for a in sorted(groups):
    c, v, m, combo = groups[a]
    print(f"  a={a:5.1f}: n={c:2d} visits={v:3d} best={m:9.4f} {combo}")
