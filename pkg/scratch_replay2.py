import sys

import numpy as np

from roundsim import sim
from roundsim.dynamics import decode_action
from roundsim.world import MODE_ARRIVED

which = sys.argv[1] if len(sys.argv) > 1 else "case2"
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
t_probe = float(sys.argv[3]) if len(sys.argv) > 3 else 17.2
cfg_fn = {"case1": sim.case1_config, "case2": sim.case2_config}[which]
cfg = cfg_fn(seeds=sim.Seeds(sim=seed, planner=seed, uncertainty=seed))
log = sim.run_episode(cfg, run_id=seed)
cols = {c: i for i, c in enumerate(sim.CSV_COLUMNS)}
specs = {s.vid: s for s in cfg.vehicles}
order = [s.vid for s in cfg.vehicles]

rows, modes, prev = {}, {}, {}
for rec, md in zip(log.records, log.modes):
    if abs(rec[cols["t"]] - t_probe) < 1e-9:
        vid = rec[cols["id"]]
        rows[vid] = [rec[cols["r"]], rec[cols["theta"]], rec[cols["v"]],
                     rec[cols["phi"]], rec[cols["lane"]]]
        modes[vid] = md
        prev[vid] = (rec[cols["accel"]], rec[cols["phi_dot"]])

avs = [v for v in order if v in rows and modes[v] < MODE_ARRIVED
       and specs[v].kind == "AV"]
hdvs = [v for v in order if v in rows and modes[v] < MODE_ARRIVED
        and specs[v].kind == "HDV"]
print("avs:", avs, "hdvs:", hdvs)
for v in avs + hdvs:
    print(f"  {v} row={np.round(rows[v], 3)} mode={modes[v]} prev={prev[v]}")

search = sim._SearchPolicy(cfg, cfg.risk)
k = int(round(t_probe / cfg.dt))
pseed = sim._stream_seed(seed, sim._STREAM_PLANNER, k)
useed = sim._stream_seed(seed, sim._STREAM_UNCERTAINTY, k)
res = search.planner.plan(
    np.array([rows[v] for v in avs]),
    np.array([modes[v] for v in avs], dtype=np.int64),
    [specs[v] for v in avs],
    np.array([rows[v] for v in hdvs]).reshape(len(hdvs), 5),
    np.array([modes[v] for v in hdvs], dtype=np.int64),
    [specs[v] for v in hdvs],
    np.array([prev[v] for v in avs]), seed=int(pseed),
    uncertainty_seed=int(useed), return_tree=True)
print("fallback", res.fallback, "safe", res.n_safe_children, "/",
      res.n_children, "chosen", res.actions)
par = search.planner.av_params
names = avs + hdvs


def attrib(node):
    b = node.bundle
    if b is None:
        return "no bundle"
    d = np.asarray(b.dist0, dtype=float)
    ds = np.asarray(b.dsafe0, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ds > 0, d / ds, np.inf)
    n = d.shape[0]
    worst, pair = np.inf, None
    for i in range(len(avs)):
        for j in range(i + 1, n):
            if ratio[i, j] < worst:
                worst = ratio[i, j]
                pair = (names[i], names[j], d[i, j], ds[i, j])
    s = (f"qcc={b.qcc_max:.3f} qch={b.qch_max:.3f} "
         f"bd={np.min(b.bdist):.2f}")
    if pair:
        s += (f" tight={pair[0]}x{pair[1]} d={pair[2]:.2f} "
              f"ds={pair[3]:.2f}")
    return s


print("\nroot:", "safe" if res.root.safe else "UNSAFE", attrib(res.root))
kids = sorted(res.root.children, key=lambda c: -c.visits)
for node in kids[:14]:
    dec = [(round(decode_action(a, par)[0], 1),
            round(decode_action(a, par)[1], 1),
            decode_action(a, par)[2]) for a in node.action]
    print(f"a={dec} v={node.visits:3d} "
          f"mean={node.value / max(node.visits, 1):9.2f} "
          f"safe={int(node.safe)} {attrib(node)}")
